/**
 * JSONL corpus reading: one record per line with a required nonempty
 * `source` and optional `target`/`reference`/style fields.
 */

import { readFileSync } from 'node:fs';

export type CorpusRecord = {
  source: string;
  target?: string;
  reference?: string;
  source_style?: string;
  target_style?: string;
};

export class CorpusFormatError extends Error {}

export function parseJsonl(text: string, path = '<input>'): CorpusRecord[] {
  const records: CorpusRecord[] = [];
  const lines = text.split(/\r?\n/);
  lines.forEach((line, lineIndex) => {
    if (!line.trim()) return;
    let raw: unknown;
    try {
      raw = JSON.parse(line);
    } catch {
      throw new CorpusFormatError(`${path}: record ${records.length} (line ${lineIndex + 1}): invalid JSON`);
    }
    if (typeof raw !== 'object' || raw === null || Array.isArray(raw)) {
      throw new CorpusFormatError(`${path}: record ${records.length} (line ${lineIndex + 1}): not a JSON object`);
    }
    const record = raw as Record<string, unknown>;
    if (typeof record.source !== 'string' || record.source.trim() === '') {
      throw new CorpusFormatError(
        `${path}: record ${records.length} (line ${lineIndex + 1}): missing or empty "source"`,
      );
    }
    if (record.target !== undefined && (typeof record.target !== 'string' || record.target.trim() === '')) {
      throw new CorpusFormatError(
        `${path}: record ${records.length} (line ${lineIndex + 1}): "target" must be nonempty text when present`,
      );
    }
    records.push(record as CorpusRecord);
  });
  return records;
}

export function readCorpus(path: string): CorpusRecord[] {
  return parseJsonl(readFileSync(path, 'utf-8'), path);
}

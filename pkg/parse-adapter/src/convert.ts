/**
 * Corpus conversion: every record side becomes one CoNLL-U sentence with
 * id `<record_index>:<side>`. Output files are written atomically (temp
 * file plus rename), one per side, so downstream readers never observe a
 * half-written corpus.
 */

import { mkdirSync, renameSync, writeFileSync } from 'node:fs';
import { join } from 'node:path';
import process from 'node:process';

import { Sentence, sentencesToConllu, validateSentence } from './conllu.js';
import { CorpusRecord } from './corpus.js';
import { ParseEngine, flatAnnotation, tokenize } from './parser.js';

export type ParseJob = {
  records: CorpusRecord[];
  outputDir: string;
  engine: ParseEngine;
  warn?: (message: string) => void;
};

const SIDES = ['source', 'target'] as const;
type Side = (typeof SIDES)[number];

export function annotateSentence(
  engine: ParseEngine,
  id: string,
  text: string,
  warn: (message: string) => void,
): Sentence {
  const tokens = tokenize(text);
  if (tokens.length === 0) {
    throw new Error(`sentence ${id}: no tokens in ${JSON.stringify(text)}`);
  }
  let annotation;
  try {
    annotation = engine.parse(tokens);
    if (
      annotation.heads.length !== tokens.length ||
      annotation.deprels.length !== tokens.length ||
      annotation.upos.length !== tokens.length
    ) {
      throw new Error('engine returned misaligned annotation');
    }
  } catch (err) {
    warn(`sentence ${id}: ${engine.name} failed (${err}); emitting flat graph`);
    annotation = flatAnnotation(tokens.length);
  }
  const sentence: Sentence = {
    id,
    text,
    tokens: tokens.map((form, i) => ({
      id: i + 1,
      form,
      upos: annotation.upos[i],
      head: annotation.heads[i],
      deprel: annotation.deprels[i],
    })),
  };
  try {
    validateSentence(sentence);
  } catch (err) {
    warn(`sentence ${id}: invalid annotation (${err}); emitting flat graph`);
    const flat = flatAnnotation(tokens.length);
    sentence.tokens = tokens.map((form, i) => ({
      id: i + 1,
      form,
      upos: flat.upos[i],
      head: flat.heads[i],
      deprel: flat.deprels[i],
    }));
  }
  return sentence;
}

export function parseCorpus(job: ParseJob): string[] {
  const warn = job.warn ?? ((message: string) => console.warn(message));
  const perSide: Record<Side, Sentence[]> = { source: [], target: [] };
  job.records.forEach((record, index) => {
    for (const side of SIDES) {
      const text = record[side];
      if (text === undefined) continue;
      perSide[side].push(annotateSentence(job.engine, `${index}:${side}`, text, warn));
    }
  });

  mkdirSync(job.outputDir, { recursive: true });
  const written: string[] = [];
  for (const side of SIDES) {
    const path = join(job.outputDir, `${side}.conllu`);
    const tmp = join(job.outputDir, `.${side}.conllu.${process.pid}.tmp`);
    writeFileSync(tmp, sentencesToConllu(perSide[side]), 'utf-8');
    renameSync(tmp, path);
    written.push(path);
  }
  return written;
}

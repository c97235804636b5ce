#!/usr/bin/env node
/**
 * parse-adapter CLI.
 *
 *   parse-adapter parse --in corpus.jsonl --out dir/ [--lang en] [--engine rule-en]
 *
 * Exit codes: 0 success, 1 any error (missing input, malformed record,
 * unknown flag).
 */

import process from 'node:process';

import { readCorpus } from './corpus.js';
import { parseCorpus } from './convert.js';
import { engineFor } from './parser.js';

type Flags = { in?: string; out?: string; lang: string; engine?: string };

function parseFlags(argv: string[]): Flags {
  const flags: Flags = { lang: 'en' };
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    const value = argv[i + 1];
    if (value === undefined) throw new Error(`flag ${key} needs a value`);
    switch (key) {
      case '--in':
        flags.in = value;
        break;
      case '--out':
        flags.out = value;
        break;
      case '--lang':
        flags.lang = value;
        break;
      case '--engine':
        flags.engine = value;
        break;
      default:
        throw new Error(`unknown flag ${key}`);
    }
  }
  return flags;
}

export function run(argv: string[]): number {
  const [command, ...rest] = argv;
  if (command !== 'parse') {
    console.error('usage: parse-adapter parse --in corpus.jsonl --out dir/ [--lang en]');
    return 1;
  }
  try {
    const flags = parseFlags(rest);
    if (!flags.in || !flags.out) {
      throw new Error('both --in and --out are required');
    }
    const records = readCorpus(flags.in);
    const engine = engineFor(flags.lang, flags.engine);
    const written = parseCorpus({ records, outputDir: flags.out, engine });
    console.log(
      `parsed ${records.length} records with ${engine.name}@${engine.version} -> ${written.join(', ')}`,
    );
    return 0;
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

const isMain =
  process.argv[1] !== undefined && import.meta.url === new URL(`file://${process.argv[1]}`).href;
if (isMain) {
  process.exit(run(process.argv.slice(2)));
}

/**
 * Deterministic rule-based dependency annotation.
 *
 * No trained parser ships in this environment, so the adapter provides a
 * compact heuristic engine behind a pluggable interface: closed-class
 * lexicons and suffix rules assign coarse POS tags, the first verb (else
 * first noun, else the first token) becomes the root, and the remaining
 * tokens attach by simple positional rules. Output is always structurally
 * valid CoNLL-U; consumers never depend on which engine produced it.
 */

export type Annotation = {
  upos: string[];
  heads: number[]; // 1-based head ids, 0 for the root
  deprels: string[];
};

export interface ParseEngine {
  readonly name: string;
  readonly version: string;
  parse(tokens: string[]): Annotation;
}

const TOKEN_RE = /[A-Za-z0-9]+(?:['’][A-Za-z]+)?|[^\sA-Za-z0-9]/g;

export function tokenize(text: string): string[] {
  return text.match(TOKEN_RE) ?? [];
}

/** Flat fallback: token 1 is the root and everything else attaches to it. */
export function flatAnnotation(count: number): Annotation {
  if (count < 1) throw new Error('cannot annotate an empty token list');
  return {
    upos: Array(count).fill('X'),
    heads: [0, ...Array(count - 1).fill(1)],
    deprels: ['root', ...Array(count - 1).fill('dep')],
  };
}

export class FlatEngine implements ParseEngine {
  readonly name = 'flat';
  readonly version = '1';
  parse(tokens: string[]): Annotation {
    return flatAnnotation(tokens.length);
  }
}

const DETERMINERS = new Set([
  'the', 'a', 'an', 'this', 'that', 'these', 'those', 'my', 'your', 'his',
  'her', 'its', 'our', 'their', 'some', 'any', 'no', 'every', 'each',
]);
const ADPOSITIONS = new Set([
  'in', 'on', 'at', 'of', 'to', 'from', 'with', 'without', 'by', 'for',
  'about', 'over', 'under', 'into', 'through', 'between', 'against', 'during',
  'before', 'after', 'above', 'below', 'near', 'upon',
]);
const PRONOUNS = new Set([
  'i', 'you', 'he', 'she', 'it', 'we', 'they', 'me', 'him', 'us', 'them',
  'myself', 'yourself', 'himself', 'herself', 'itself', 'ourselves',
  'themselves', 'who', 'whom', 'what', 'which', 'thou', 'thee', 'ye',
]);
const AUXILIARIES = new Set([
  'am', 'is', 'are', 'was', 'were', 'be', 'been', 'being', 'do', 'does',
  'did', 'have', 'has', 'had', 'will', 'would', 'shall', 'should', 'can',
  'could', 'may', 'might', 'must', 'art', 'hath', 'doth', 'wilt', 'shalt',
]);
const COORDINATORS = new Set(['and', 'or', 'but', 'nor', 'yet', 'so']);
const SUBORDINATORS = new Set([
  'because', 'although', 'though', 'while', 'whereas', 'if', 'unless',
  'since', 'until', 'when', 'whenever', 'where', 'that', 'whether',
]);
const COMMON_VERBS = new Set([
  'go', 'goes', 'went', 'gone', 'going', 'make', 'makes', 'made', 'making',
  'say', 'says', 'said', 'see', 'sees', 'saw', 'seen', 'take', 'takes',
  'took', 'taken', 'come', 'comes', 'came', 'get', 'gets', 'got', 'know',
  'knows', 'knew', 'known', 'think', 'thinks', 'thought', 'find', 'finds',
  'found', 'give', 'gives', 'gave', 'given', 'tell', 'tells', 'told',
  'feel', 'feels', 'felt', 'leave', 'leaves', 'left', 'put', 'puts',
  'keep', 'keeps', 'kept', 'let', 'lets', 'seem', 'seems', 'seemed',
  'love', 'loves', 'loved', 'hate', 'hates', 'hated', 'want', 'wants',
  'wanted', 'like', 'likes', 'liked', 'eat', 'eats', 'ate', 'eaten',
  'chase', 'chases', 'chased', 'sing', 'sings', 'sang', 'sung', 'sat',
  'sit', 'sits', 'run', 'runs', 'ran',
]);
const COMMON_ADJECTIVES = new Set([
  'good', 'bad', 'great', 'small', 'big', 'large', 'old', 'new', 'young',
  'long', 'short', 'high', 'low', 'hot', 'cold', 'warm', 'fine', 'nice',
  'happy', 'sad', 'bright', 'dark', 'slow', 'fast', 'fair', 'poor', 'rich',
]);

function tagToken(token: string, position: number): string {
  if (!/[A-Za-z0-9]/.test(token)) return 'PUNCT';
  if (/^\d+([.,]\d+)*$/.test(token)) return 'NUM';
  const lower = token.toLowerCase();
  if (lower === 'not' || lower === "n't") return 'PART';
  if (lower === 'to') return 'PART';
  if (DETERMINERS.has(lower)) return 'DET';
  if (ADPOSITIONS.has(lower)) return 'ADP';
  if (PRONOUNS.has(lower)) return 'PRON';
  if (AUXILIARIES.has(lower)) return 'AUX';
  if (COORDINATORS.has(lower)) return 'CCONJ';
  if (SUBORDINATORS.has(lower)) return 'SCONJ';
  if (COMMON_VERBS.has(lower)) return 'VERB';
  if (COMMON_ADJECTIVES.has(lower)) return 'ADJ';
  if (/ly$/.test(lower) && lower.length > 3) return 'ADV';
  if (/(ing|ed|eth|est)$/.test(lower) && lower.length > 4) return 'VERB';
  if (/(ous|ful|less|ish|ive|able|ible|al)$/.test(lower) && lower.length > 4) return 'ADJ';
  if (position > 0 && /^[A-Z]/.test(token)) return 'PROPN';
  return 'NOUN';
}

const NOMINAL = new Set(['NOUN', 'PROPN', 'PRON', 'NUM']);

function nextIndex(upos: string[], from: number, wanted: Set<string>): number {
  for (let i = from + 1; i < upos.length; i++) {
    if (wanted.has(upos[i])) return i;
  }
  return -1;
}

/**
 * Heuristic English engine, pinned by its version string: identical input
 * always yields identical output, and bumping the rules bumps the version.
 */
export class RuleEngine implements ParseEngine {
  readonly name = 'rule-en';
  readonly version = '1';

  parse(tokens: string[]): Annotation {
    if (tokens.length === 0) throw new Error('cannot annotate an empty token list');
    const upos = tokens.map((t, i) => tagToken(t, i));

    let root = upos.findIndex((t) => t === 'VERB');
    if (root < 0) root = upos.findIndex((t) => t === 'AUX');
    if (root < 0) root = upos.findIndex((t) => NOMINAL.has(t));
    if (root < 0) root = 0;

    const heads = new Array<number>(tokens.length).fill(root + 1);
    const deprels = new Array<string>(tokens.length).fill('dep');
    let sawSubject = false;
    let sawObject = false;

    tokens.forEach((_, i) => {
      if (i === root) {
        heads[i] = 0;
        deprels[i] = 'root';
        return;
      }
      const tag = upos[i];
      switch (tag) {
        case 'PUNCT':
          deprels[i] = 'punct';
          break;
        case 'DET':
        case 'ADJ':
        case 'NUM': {
          const noun = nextIndex(upos, i, NOMINAL);
          if (noun >= 0 && noun !== root) heads[i] = noun + 1;
          deprels[i] = tag === 'DET' ? 'det' : tag === 'ADJ' ? 'amod' : 'nummod';
          break;
        }
        case 'ADP': {
          const noun = nextIndex(upos, i, NOMINAL);
          if (noun >= 0 && noun !== root) heads[i] = noun + 1;
          deprels[i] = 'case';
          break;
        }
        case 'AUX':
          deprels[i] = i < root ? 'aux' : 'cop';
          break;
        case 'ADV':
          deprels[i] = 'advmod';
          break;
        case 'PART':
          deprels[i] = 'mark';
          break;
        case 'CCONJ':
          deprels[i] = 'cc';
          break;
        case 'SCONJ':
          deprels[i] = 'mark';
          break;
        case 'VERB':
          deprels[i] = 'xcomp';
          break;
        default: {
          // nominal: subject before the root, object/oblique after
          if (i < root) {
            deprels[i] = sawSubject ? 'nmod' : 'nsubj';
            sawSubject = true;
          } else {
            deprels[i] = sawObject ? 'obl' : 'obj';
            sawObject = true;
          }
        }
      }
    });
    return { upos, heads, deprels };
  }
}

export const ENGINES: Record<string, () => ParseEngine> = {
  'rule-en': () => new RuleEngine(),
  flat: () => new FlatEngine(),
};

export function engineFor(lang: string, name?: string): ParseEngine {
  if (name) {
    const factory = ENGINES[name];
    if (!factory) throw new Error(`unknown engine ${name}`);
    return factory();
  }
  // the rule engine's lexicons are English; other languages get the
  // structure-free fallback rather than wrong guesses
  return lang === 'en' ? new RuleEngine() : new FlatEngine();
}

/**
 * CoNLL-U serialization: 10 tab-separated columns, `# sent_id` and `# text`
 * comments, one blank line after every sentence.
 */

export type Token = {
  id: number; // 1-based position
  form: string;
  upos: string;
  head: number; // 0 means root
  deprel: string;
};

export type Sentence = {
  id: string;
  text: string;
  tokens: Token[];
};

export function sentenceToConllu(sentence: Sentence): string {
  const lines: string[] = [];
  lines.push(`# sent_id = ${sentence.id}`);
  // comments are single-line; collapse any whitespace runs in the raw text
  lines.push(`# text = ${sentence.text.replace(/\s+/g, ' ').trim()}`);
  for (const token of sentence.tokens) {
    lines.push(
      [
        String(token.id),
        token.form,
        '_', // lemma
        token.upos,
        '_', // xpos
        '_', // feats
        String(token.head),
        token.deprel,
        '_', // deps
        '_', // misc
      ].join('\t'),
    );
  }
  return lines.join('\n') + '\n';
}

export function sentencesToConllu(sentences: Sentence[]): string {
  return sentences.map(sentenceToConllu).join('\n');
}

/**
 * Minimal structural check used by the adapter's own tests: token ids are
 * sequential from 1, heads stay in [0, n], and no token heads itself.
 */
export function validateSentence(sentence: Sentence): void {
  const n = sentence.tokens.length;
  if (n === 0) {
    throw new Error(`sentence ${sentence.id}: no tokens`);
  }
  let roots = 0;
  sentence.tokens.forEach((token, i) => {
    if (token.id !== i + 1) {
      throw new Error(`sentence ${sentence.id}: id ${token.id} out of order`);
    }
    if (token.head < 0 || token.head > n) {
      throw new Error(`sentence ${sentence.id}: head ${token.head} out of range`);
    }
    if (token.head === token.id) {
      throw new Error(`sentence ${sentence.id}: token ${token.id} heads itself`);
    }
    if (token.head === 0) roots += 1;
  });
  if (roots !== 1) {
    throw new Error(`sentence ${sentence.id}: expected exactly one root, found ${roots}`);
  }
}

export { Sentence, Token, sentenceToConllu, sentencesToConllu, validateSentence } from './conllu.js';
export { CorpusRecord, CorpusFormatError, parseJsonl, readCorpus } from './corpus.js';
export { parseCorpus, annotateSentence, ParseJob } from './convert.js';
export {
  Annotation,
  ENGINES,
  FlatEngine,
  ParseEngine,
  RuleEngine,
  engineFor,
  flatAnnotation,
  tokenize,
} from './parser.js';

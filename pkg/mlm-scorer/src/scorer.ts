/**
 * Shared scorer contract: a sentence score is the sum over token positions
 * of the log2-probability assigned to the true token when exactly that
 * position is masked. Scores are therefore nonpositive and unnormalized
 * (longer sentences accumulate more terms); downstream quartile
 * classification absorbs the scale.
 */

export interface SentenceScorer {
  /** Human-readable backend name (model id or "stub"). */
  readonly name: string;
  /** Pseudo-log-likelihood of one sentence (log base 2, <= 0). */
  score(text: string): Promise<number>;
}

/** Collapse internal whitespace and trim; the only text preprocessing applied. */
export function normalizeWhitespace(text: string): string {
  return text.replace(/\s+/g, " ").trim();
}

export function tokenizeWhitespace(text: string): string[] {
  const normalized = normalizeWhitespace(text);
  return normalized.length === 0 ? [] : normalized.split(" ");
}

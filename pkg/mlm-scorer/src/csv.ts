/**
 * News input and score output files.
 *
 * Input: a CSV with at least `title` and `release_date` columns (extra
 * columns are ignored). Output: `date,sentence_id,pll`, one row per input
 * title in input order, ids minted from the row index so duplicate titles
 * stay distinct rows.
 */

import fs from "node:fs";
import Papa from "papaparse";

import { SentenceScorer, normalizeWhitespace } from "./scorer.js";

export interface NewsRow {
  title: string;
  release_date: string;
}

export interface ScoredRow {
  date: string;
  sentence_id: string;
  pll: number;
}

export class MissingColumnError extends Error {}

const ISO_DATE = /^(\d{4}-\d{2}-\d{2})/;

/** Normalize a release date to YYYY-MM-DD when it starts with one. */
export function normalizeDate(raw: string): string {
  const match = ISO_DATE.exec(raw.trim());
  return match ? match[1] : raw.trim();
}

export function readNewsCsv(path: string): NewsRow[] {
  const text = fs.readFileSync(path, "utf-8");
  const parsed = Papa.parse<Record<string, string>>(text, {
    header: true,
    skipEmptyLines: true,
  });
  const fields = parsed.meta.fields ?? [];
  for (const required of ["title", "release_date"]) {
    if (!fields.includes(required)) {
      throw new MissingColumnError(`news file lacks required column '${required}'`);
    }
  }
  return parsed.data.map((row) => ({
    title: row.title ?? "",
    release_date: row.release_date ?? "",
  }));
}

export async function scoreCorpus(
  rows: NewsRow[],
  scorer: SentenceScorer,
): Promise<ScoredRow[]> {
  const out: ScoredRow[] = [];
  let skipped = 0;
  for (let i = 0; i < rows.length; i++) {
    const title = normalizeWhitespace(rows[i].title);
    if (title.length === 0) {
      skipped += 1;
      continue;
    }
    const pll = await scorer.score(title);
    out.push({
      date: normalizeDate(rows[i].release_date),
      sentence_id: `s${String(i).padStart(6, "0")}`,
      pll,
    });
  }
  if (skipped > 0) {
    console.warn(`skipped ${skipped} empty titles`);
  }
  return out;
}

export function writeScoresCsv(rows: ScoredRow[], path: string): void {
  const lines = ["date,sentence_id,pll"];
  for (const row of rows) {
    lines.push(`${row.date},${row.sentence_id},${row.pll.toFixed(6)}`);
  }
  fs.writeFileSync(path, lines.join("\n") + "\n");
}

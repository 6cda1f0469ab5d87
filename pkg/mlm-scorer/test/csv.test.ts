import fs from "node:fs";
import os from "node:os";
import path from "node:path";

import { afterEach, beforeEach, describe, expect, it } from "vitest";

import { MissingColumnError, normalizeDate, readNewsCsv, scoreCorpus, writeScoresCsv } from "../src/csv";
import { StubScorer } from "../src/stub";

let dir: string;

beforeEach(() => {
  dir = fs.mkdtempSync(path.join(os.tmpdir(), "mlmscorer-"));
});

afterEach(() => {
  fs.rmSync(dir, { recursive: true, force: true });
});

function write(name: string, text: string): string {
  const p = path.join(dir, name);
  fs.writeFileSync(p, text);
  return p;
}

const NEWS = `title,release_date,publisher
"Alpha beats expectations",2019-03-04,wire
"Beta misses badly",2019-03-04 00:00:00,wire
"Alpha beats expectations",2019-03-05,blog
`;

describe("news reading", () => {
  it("keeps rows in input order and tolerates extra columns", () => {
    const rows = readNewsCsv(write("news.csv", NEWS));
    expect(rows.map((r) => r.title)).toEqual([
      "Alpha beats expectations",
      "Beta misses badly",
      "Alpha beats expectations",
    ]);
  });

  it("requires title and release_date", () => {
    expect(() => readNewsCsv(write("bad.csv", "headline,date\nfoo,2019-01-01\n"))).toThrow(
      MissingColumnError,
    );
  });
});

describe("date normalization", () => {
  it("strips time components from ISO-prefixed stamps", () => {
    expect(normalizeDate("2019-03-04 00:00:00")).toBe("2019-03-04");
    expect(normalizeDate("2019-03-04T12:30:00Z")).toBe("2019-03-04");
    expect(normalizeDate(" 2019-03-04 ")).toBe("2019-03-04");
  });

  it("passes through what it cannot normalize", () => {
    expect(normalizeDate("04/03/2019")).toBe("04/03/2019");
  });
});

describe("corpus scoring", () => {
  it("emits one row per title with distinct ids for duplicates", async () => {
    const rows = readNewsCsv(write("news.csv", NEWS));
    const scored = await scoreCorpus(rows, new StubScorer());
    expect(scored).toHaveLength(3);
    expect(scored[0].sentence_id).not.toBe(scored[2].sentence_id);
    expect(scored[0].pll).toBe(scored[2].pll); // identical text, identical score
    expect(scored[1].date).toBe("2019-03-04");
  });

  it("skips empty titles", async () => {
    const rows = readNewsCsv(write("news.csv", 'title,release_date\n"",2019-01-01\n"ok fine",2019-01-02\n'));
    const scored = await scoreCorpus(rows, new StubScorer());
    expect(scored).toHaveLength(1);
  });

  it("writes the score CSV schema", async () => {
    const rows = readNewsCsv(write("news.csv", NEWS));
    const scored = await scoreCorpus(rows, new StubScorer());
    const out = path.join(dir, "scores.csv");
    writeScoresCsv(scored, out);
    const lines = fs.readFileSync(out, "utf-8").trim().split("\n");
    expect(lines[0]).toBe("date,sentence_id,pll");
    expect(lines).toHaveLength(4);
    for (const line of lines.slice(1)) {
      expect(line).toMatch(/^\d{4}-\d{2}-\d{2},s\d{6},-\d+\.\d{6}$/);
    }
  });
});

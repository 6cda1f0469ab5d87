#!/usr/bin/env node
/**
 * CLI: score news titles with a masked-LM (or the offline stub).
 *
 *   mlm-scorer score --in news.csv --out scores.csv [--model <name>] [--stub]
 *
 * Exit codes: 0 success, 1 internal error, 2 input error.
 */

import { MissingColumnError, readNewsCsv, scoreCorpus, writeScoresCsv } from "./csv.js";
import { SentenceScorer } from "./scorer.js";
import { StubScorer } from "./stub.js";

const DEFAULT_MODEL = "Xenova/bert-base-uncased";

interface Args {
  input: string;
  output: string;
  model: string;
  stub: boolean;
  maxLength: number;
}

function usage(): string {
  return "usage: mlm-scorer score --in news.csv --out scores.csv [--model <name>] [--stub] [--max-length N]";
}

function parseArgs(argv: string[]): Args {
  if (argv[0] !== "score") {
    throw new Error(usage());
  }
  const args: Partial<Args> = { model: DEFAULT_MODEL, stub: false, maxLength: 512 };
  for (let i = 1; i < argv.length; i++) {
    switch (argv[i]) {
      case "--in":
        args.input = argv[++i];
        break;
      case "--out":
        args.output = argv[++i];
        break;
      case "--model":
        args.model = argv[++i];
        break;
      case "--stub":
        args.stub = true;
        break;
      case "--max-length":
        args.maxLength = Number(argv[++i]);
        break;
      default:
        throw new Error(`unknown argument ${argv[i]}\n${usage()}`);
    }
  }
  if (!args.input || !args.output) {
    throw new Error(usage());
  }
  return args as Args;
}

export async function main(argv: string[]): Promise<number> {
  let args: Args;
  try {
    args = parseArgs(argv);
  } catch (err) {
    console.error(String(err instanceof Error ? err.message : err));
    return 2;
  }
  try {
    const rows = readNewsCsv(args.input);
    let scorer: SentenceScorer;
    if (args.stub) {
      scorer = new StubScorer();
    } else {
      const { MaskedLmScorer } = await import("./mlm.js");
      scorer = await MaskedLmScorer.load(args.model, args.maxLength);
    }
    const scored = await scoreCorpus(rows, scorer);
    writeScoresCsv(scored, args.output);
    console.log(`scored ${scored.length}/${rows.length} titles with ${scorer.name} -> ${args.output}`);
    return 0;
  } catch (err) {
    if (
      err instanceof MissingColumnError ||
      (err as NodeJS.ErrnoException)?.code === "ENOENT"
    ) {
      console.error(`error: ${err instanceof Error ? err.message : err}`);
      return 2;
    }
    console.error(`internal error: ${err instanceof Error ? (err.stack ?? err.message) : err}`);
    return 1;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url === new URL(`file://${process.argv[1]}`).href;
if (invokedDirectly) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}

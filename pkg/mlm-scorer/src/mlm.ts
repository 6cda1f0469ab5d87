/**
 * Real masked-LM scorer backed by transformers.js (onnx runtime, CPU).
 *
 * For each content token the input is copied, that one position replaced by
 * the mask token, and the model's log2-probability of the true token at
 * that position accumulated. All positions of one sentence are scored in a
 * single batched forward pass. Special tokens (CLS/SEP style) are never
 * masked and contribute no terms.
 *
 * The dependency is optional: environments without model access use the
 * stub scorer instead (`--stub`).
 */

import { SentenceScorer, normalizeWhitespace } from "./scorer.js";

const LOG2E = Math.LOG2E;

interface TransformersModule {
  AutoTokenizer: { from_pretrained(name: string): Promise<any> };
  AutoModelForMaskedLM: { from_pretrained(name: string): Promise<any> };
  Tensor: new (type: string, data: BigInt64Array, dims: number[]) => any;
}

async function loadTransformers(): Promise<TransformersModule> {
  try {
    return (await import("@huggingface/transformers")) as unknown as TransformersModule;
  } catch (err) {
    throw new Error(
      `masked-LM backend unavailable (install @huggingface/transformers or use --stub): ${err}`,
    );
  }
}

export class MaskedLmScorer implements SentenceScorer {
  private constructor(
    readonly name: string,
    private readonly tokenizer: any,
    private readonly model: any,
    private readonly maskId: bigint,
    private readonly specialIds: Set<bigint>,
    private readonly maxLength: number,
  ) {}

  static async load(modelName: string, maxLength = 512): Promise<MaskedLmScorer> {
    const { AutoTokenizer, AutoModelForMaskedLM } = await loadTransformers();
    const tokenizer = await AutoTokenizer.from_pretrained(modelName);
    const model = await AutoModelForMaskedLM.from_pretrained(modelName);
    const maskId = BigInt(tokenizer.mask_token_id);
    const special = new Set<bigint>(
      (tokenizer.all_special_ids ?? []).map((id: number) => BigInt(id)),
    );
    return new MaskedLmScorer(modelName, tokenizer, model, maskId, special, maxLength);
  }

  async score(text: string): Promise<number> {
    const { Tensor } = await loadTransformers();
    const normalized = normalizeWhitespace(text);
    const encoded = this.tokenizer(normalized);
    let ids: bigint[] = Array.from(encoded.input_ids.data as BigInt64Array);
    if (ids.length > this.maxLength) {
      console.warn(`truncating input of ${ids.length} tokens to ${this.maxLength}`);
      // keep the trailing special token when present
      const tail = this.specialIds.has(ids[ids.length - 1]) ? [ids[ids.length - 1]] : [];
      ids = ids.slice(0, this.maxLength - tail.length).concat(tail);
    }
    const positions = ids
      .map((id, i) => (this.specialIds.has(id) ? -1 : i))
      .filter((i) => i >= 0);
    if (positions.length === 0) {
      throw new Error("empty text after tokenization");
    }

    const len = ids.length;
    const batch = positions.length;
    const batchIds = new BigInt64Array(batch * len);
    const attention = new BigInt64Array(batch * len).fill(1n);
    positions.forEach((pos, row) => {
      for (let i = 0; i < len; i++) {
        batchIds[row * len + i] = i === pos ? this.maskId : ids[i];
      }
    });
    const output = await this.model({
      input_ids: new Tensor("int64", batchIds, [batch, len]),
      attention_mask: new Tensor("int64", attention, [batch, len]),
    });
    const logits = output.logits; // [batch, len, vocab]
    const vocab = logits.dims[2];
    const data = logits.data as Float32Array;

    let total = 0;
    positions.forEach((pos, row) => {
      const offset = (row * len + pos) * vocab;
      let maxLogit = -Infinity;
      for (let v = 0; v < vocab; v++) {
        if (data[offset + v] > maxLogit) maxLogit = data[offset + v];
      }
      let sumExp = 0;
      for (let v = 0; v < vocab; v++) {
        sumExp += Math.exp(data[offset + v] - maxLogit);
      }
      const trueLogit = data[offset + Number(ids[pos])];
      total += (trueLogit - maxLogit - Math.log(sumExp)) * LOG2E;
    });
    return total;
  }
}

// Ambient fallback: the masked-LM backend is an optional dependency whose
// install can fail offline (its runtime downloads platform binaries); the
// dynamic import in mlm.ts handles absence at runtime, this handles it at
// compile time.
declare module "@huggingface/transformers";

// Deterministic colors for codes and labels. The hash is fixed so the same
// code renders the same color across sessions, which is what makes orbit
// repetition visible: symmetric vertices share a code, hence a color.

export interface Rgb {
  r: number;
  g: number;
  b: number;
}

// 32-bit avalanche mix (fmix step of murmur3)
export function mix32(x: number): number {
  let h = x >>> 0;
  h ^= h >>> 16;
  h = Math.imul(h, 0x85ebca6b) >>> 0;
  h ^= h >>> 13;
  h = Math.imul(h, 0xc2b2ae35) >>> 0;
  h ^= h >>> 16;
  return h >>> 0;
}

export function codeColor(code: number): Rgb {
  const h = mix32(code);
  // keep channels off the extremes so text and wireframe stay readable
  return {
    r: 40 + ((h >>> 0) & 0xff) * 0.8,
    g: 40 + ((h >>> 8) & 0xff) * 0.8,
    b: 40 + ((h >>> 16) & 0xff) * 0.8,
  };
}

const KIND_COLORS: Record<string, Rgb> = {
  discrete: { r: 86, g: 156, b: 214 },
  nfold: { r: 78, g: 201, b: 176 },
  continuous: { r: 220, g: 170, b: 60 },
  none: { r: 200, g: 80, b: 80 },
};

export function kindColor(kind: string): Rgb {
  return KIND_COLORS[kind] ?? { r: 128, g: 128, b: 128 };
}

export function partColor(label: number): Rgb {
  if (label === 0) return { r: 150, g: 150, b: 160 };
  return codeColor(0x9e3779b9 ^ label);
}

// bit k of a d-bit code, most significant bit first
export function codeBit(code: number, k: number, d: number): number {
  return (code >>> (d - 1 - k)) & 1;
}

export function bitColor(bit: number): Rgb {
  return bit ? { r: 235, g: 235, b: 235 } : { r: 25, g: 25, b: 25 };
}

export const MAX_PREVIEW_BITS = 16;

export function validateBits(d: number): string | null {
  if (!Number.isInteger(d) || d < 1 || d > MAX_PREVIEW_BITS) {
    return `code length must be an integer in [1, ${MAX_PREVIEW_BITS}]`;
  }
  return null;
}

export function validateBitIndex(k: number, d: number): string | null {
  if (!Number.isInteger(k) || k < 0 || k >= d) {
    return `bit index must be an integer in [0, ${d})`;
  }
  return null;
}

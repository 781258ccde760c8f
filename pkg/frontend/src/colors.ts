/**
 * Deterministic feature colors.
 *
 * Adjacent entities should look distinct, but a re-render must never
 * reshuffle them, so the hue comes from a hash of the entity key instead
 * of a random draw.
 */

/** Default fill opacity for map geometry. */
export const DEFAULT_OPACITY = 0.6;

/** 32-bit FNV-1a over the UTF-16 code units of `text`. */
export function hashKey(text: string): number {
  let hash = 0x811c9dc5;
  for (let i = 0; i < text.length; i++) {
    hash ^= text.charCodeAt(i);
    hash = Math.imul(hash, 0x01000193);
  }
  return hash >>> 0;
}

/**
 * Map a key to a stable HSL color.
 *
 * Hue spans the full wheel; saturation and lightness move inside narrow
 * bands so every color stays readable on the basemap.
 */
export function hashColor(key: string): string {
  const hash = hashKey(key);
  const hue = hash % 360;
  const saturation = 55 + ((hash >>> 9) % 30);
  const lightness = 35 + ((hash >>> 17) % 20);
  return `hsl(${hue}, ${saturation}%, ${lightness}%)`;
}

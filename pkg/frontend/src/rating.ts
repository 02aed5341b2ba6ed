/** Input sanitization for rating values: [0, 1] at 0.01 granularity. */

/**
 * Clamp a raw input to [0, 1] and snap it to the 0.01 grid.
 *
 * Keyboard entry can produce anything ("1.7", "-3", "0.005"); whatever
 * arrives is pinned to the slider's own scale before it may be submitted.
 * Non-finite input snaps to 0.
 */
export function clampRating(value: number): number {
  if (!Number.isFinite(value)) return 0;
  const pinned = Math.min(1, Math.max(0, value));
  return Math.round(pinned * 100) / 100;
}

/** True once every pending item carries a rating. */
export function allRated(
  itemIds: readonly string[],
  ratings: ReadonlyMap<string, number>,
): boolean {
  return itemIds.length > 0 && itemIds.every((id) => ratings.has(id));
}

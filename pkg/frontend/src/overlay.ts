import type { Taxonomy } from './types.js'

/**
 * Pure compositing helpers. The server hands out the id-encoded mask PNG;
 * colouring and blending happen here from the taxonomy palette, so no
 * second rendering of the mask ever leaves the server.
 */

/** Class ids from the greyscale mask's RGBA buffer (R = G = B = id). */
export function idsFromGreyscale(rgba: Uint8ClampedArray): Uint8Array {
  const ids = new Uint8Array(rgba.length / 4)
  for (let i = 0; i < ids.length; i++) {
    ids[i] = rgba[i * 4]!
  }
  return ids
}

/** RGBA colouring of a class-id buffer; ignore pixels become transparent. */
export function colourise(ids: Uint8Array, taxonomy: Taxonomy): Uint8ClampedArray {
  const palette = new Map(taxonomy.classes.map((c) => [c.id, c.colour]))
  const out = new Uint8ClampedArray(ids.length * 4)
  for (let i = 0; i < ids.length; i++) {
    const colour = palette.get(ids[i]!)
    if (colour === undefined) continue // ignore_index or unknown: transparent
    out[i * 4] = colour[0]
    out[i * 4 + 1] = colour[1]
    out[i * 4 + 2] = colour[2]
    out[i * 4 + 3] = 255
  }
  return out
}

/** Blend mask colours over the photo at the given opacity (both RGBA). */
export function composite(
  photo: Uint8ClampedArray,
  maskColours: Uint8ClampedArray,
  alpha: number,
): Uint8ClampedArray {
  if (photo.length !== maskColours.length) {
    throw new Error(`buffer sizes differ: ${photo.length} vs ${maskColours.length}`)
  }
  const a = Math.min(1, Math.max(0, alpha))
  const out = new Uint8ClampedArray(photo.length)
  for (let i = 0; i < photo.length; i += 4) {
    const cover = (maskColours[i + 3]! / 255) * a
    out[i] = photo[i]! * (1 - cover) + maskColours[i]! * cover
    out[i + 1] = photo[i + 1]! * (1 - cover) + maskColours[i + 1]! * cover
    out[i + 2] = photo[i + 2]! * (1 - cover) + maskColours[i + 2]! * cover
    out[i + 3] = 255
  }
  return out
}

/** Distinct class ids present in a mask, in ascending order. */
export function presentClassIds(ids: Uint8Array, taxonomy: Taxonomy): number[] {
  const seen = new Set<number>()
  for (const id of ids) {
    if (id !== taxonomy.ignore_index) seen.add(id)
  }
  return [...seen].sort((x, y) => x - y)
}

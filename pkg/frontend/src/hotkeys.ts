import { DEFECT_TAGS, type DefectTag } from './types.js'

/**
 * Keyboard map. Every interaction is reachable without the mouse: the
 * review pace is seconds per sample, so hands stay on the keys.
 */
export type UiAction =
  | { kind: 'accept' }
  | { kind: 'toggle-reject-mode' }
  | { kind: 'confirm-reject' }
  | { kind: 'toggle-tag'; tag: DefectTag }
  | { kind: 'alpha-delta'; delta: number }
  | { kind: 'export' }
  | { kind: 'suggested-tags' }

export function actionForKey(key: string): UiAction | null {
  switch (key.toLowerCase()) {
    case 'a':
      return { kind: 'accept' }
    case 'r':
      return { kind: 'toggle-reject-mode' }
    case 'enter':
      return { kind: 'confirm-reject' }
    case '[':
    case 'arrowdown':
      return { kind: 'alpha-delta', delta: -0.1 }
    case ']':
    case 'arrowup':
      return { kind: 'alpha-delta', delta: +0.1 }
    case 'e':
      return { kind: 'export' }
    case 's':
      return { kind: 'suggested-tags' }
    default: {
      const digit = Number.parseInt(key, 10)
      if (Number.isInteger(digit) && digit >= 1 && digit <= DEFECT_TAGS.length) {
        return { kind: 'toggle-tag', tag: DEFECT_TAGS[digit - 1]! }
      }
      return null
    }
  }
}

export const HOTKEY_LEGEND: ReadonlyArray<[string, string]> = [
  ['A', 'accept'],
  ['R', 'reject mode'],
  ['1-8', 'toggle defect tag'],
  ['S', 'take suggested tags'],
  ['Enter', 'confirm reject'],
  ['[ ]', 'overlay opacity'],
  ['E', 'export accepted'],
]

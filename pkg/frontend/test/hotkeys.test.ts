import { describe, expect, it } from 'vitest'

import { actionForKey } from '../src/hotkeys.js'
import { DEFECT_TAGS } from '../src/types.js'

describe('actionForKey', () => {
  it('maps the decision keys', () => {
    expect(actionForKey('a')).toEqual({ kind: 'accept' })
    expect(actionForKey('A')).toEqual({ kind: 'accept' })
    expect(actionForKey('r')).toEqual({ kind: 'toggle-reject-mode' })
    expect(actionForKey('Enter')).toEqual({ kind: 'confirm-reject' })
  })

  it('maps every digit to its defect tag', () => {
    DEFECT_TAGS.forEach((tag, i) => {
      expect(actionForKey(String(i + 1))).toEqual({ kind: 'toggle-tag', tag })
    })
    expect(actionForKey('9')).toBeNull()
    expect(actionForKey('0')).toBeNull()
  })

  it('maps overlay and export keys', () => {
    expect(actionForKey('[')).toEqual({ kind: 'alpha-delta', delta: -0.1 })
    expect(actionForKey(']')).toEqual({ kind: 'alpha-delta', delta: +0.1 })
    expect(actionForKey('ArrowUp')).toEqual({ kind: 'alpha-delta', delta: +0.1 })
    expect(actionForKey('e')).toEqual({ kind: 'export' })
    expect(actionForKey('s')).toEqual({ kind: 'suggested-tags' })
  })

  it('ignores unmapped keys', () => {
    expect(actionForKey('q')).toBeNull()
    expect(actionForKey('Escape')).toBeNull()
  })
})

import { ApiError, ReviewApi } from './api.js'
import {
  ACCEPT_FORBIDDEN_TAGS,
  type DefectTag,
  type ReviewItem,
  type Verdict,
} from './types.js'

export interface SessionStats {
  decided: number
  accepted: number
  rejected: number
  totalDurationMs: number
}

export interface ViewState {
  item: ReviewItem | null
  done: boolean
  alpha: number
  rejectMode: boolean
  selectedTags: Set<DefectTag>
  servedAt: number | null
  session: SessionStats
  message: string
}

/**
 * Client-side mirror of the server's decision rules, so an invalid payload
 * is never put on the wire: rejects need at least one tag, accepts must not
 * carry the mask-defect tags.
 */
export function validateDecision(verdict: Verdict, tags: ReadonlySet<DefectTag>): string | null {
  if (verdict === 'reject' && tags.size === 0) {
    return 'select at least one defect tag before rejecting'
  }
  if (verdict === 'accept') {
    for (const tag of tags) {
      if (ACCEPT_FORBIDDEN_TAGS.has(tag)) {
        return `an accepted item cannot carry the ${tag} tag`
      }
    }
  }
  return null
}

export function meanDurationMs(stats: SessionStats): number | null {
  return stats.decided === 0 ? null : stats.totalDurationMs / stats.decided
}

export type DecideOutcome =
  | { kind: 'submitted'; item: ReviewItem }
  | { kind: 'blocked'; reason: string }
  | { kind: 'conflict' }

/** Single review session: one current item, keyboard-driven decisions. */
export class ReviewSession {
  readonly state: ViewState = {
    item: null,
    done: false,
    alpha: 0.5,
    rejectMode: false,
    selectedTags: new Set<DefectTag>(),
    servedAt: null,
    session: { decided: 0, accepted: 0, rejected: 0, totalDurationMs: 0 },
    message: '',
  }

  constructor(
    private readonly api: ReviewApi,
    private readonly clock: () => number = () => Date.now(),
  ) {}

  async loadNext(): Promise<ReviewItem | null> {
    const item = await this.api.fetchNext()
    this.state.item = item
    this.state.done = item === null
    this.state.rejectMode = false
    this.state.selectedTags = new Set()
    this.state.servedAt = item === null ? null : this.clock()
    this.state.message = ''
    return item
  }

  toggleTag(tag: DefectTag): void {
    if (this.state.selectedTags.has(tag)) {
      this.state.selectedTags.delete(tag)
    } else {
      this.state.selectedTags.add(tag)
    }
  }

  setAlpha(alpha: number): void {
    this.state.alpha = Math.min(1, Math.max(0, alpha))
  }

  /**
   * Submit the decision for the current item and advance optimistically.
   * Invalid decisions never reach the server; a 409 (someone else decided
   * the item first) silently refetches; other failures roll back.
   */
  async decide(verdict: Verdict, note = ''): Promise<DecideOutcome> {
    const item = this.state.item
    if (item === null) {
      return { kind: 'blocked', reason: 'no item loaded' }
    }
    const tags = verdict === 'reject' ? this.state.selectedTags : new Set<DefectTag>()
    const problem = validateDecision(verdict, tags)
    if (problem !== null) {
      this.state.message = problem
      return { kind: 'blocked', reason: problem }
    }
    const durationMs = Math.max(0, this.clock() - (this.state.servedAt ?? this.clock()))
    const rollback = { item, servedAt: this.state.servedAt }
    this.state.item = null // optimistic advance
    try {
      const decided = await this.api.submitDecision(item.id, {
        verdict,
        tags: [...tags],
        note,
        duration_ms: Math.round(durationMs),
      })
      this.state.session.decided += 1
      this.state.session.totalDurationMs += durationMs
      if (verdict === 'accept') {
        this.state.session.accepted += 1
      } else {
        this.state.session.rejected += 1
      }
      await this.loadNext()
      return { kind: 'submitted', item: decided }
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        await this.loadNext() // decided elsewhere; move on
        return { kind: 'conflict' }
      }
      this.state.item = rollback.item
      this.state.servedAt = rollback.servedAt
      this.state.message = err instanceof Error ? err.message : String(err)
      throw err
    }
  }
}

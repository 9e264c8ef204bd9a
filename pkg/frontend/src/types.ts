export const DEFECT_TAGS = [
  'hallucination',
  'missing_mask',
  'misalignment',
  'palette_leak_in_photo',
  'wrong_semantics',
  'wrong_viewpoint',
  'size_mismatch',
  'watermark',
] as const

export type DefectTag = (typeof DEFECT_TAGS)[number]

// Tags the server refuses on an accepted item; the client mirrors the rule.
export const ACCEPT_FORBIDDEN_TAGS: ReadonlySet<DefectTag> = new Set([
  'missing_mask',
  'size_mismatch',
])

export type Verdict = 'accept' | 'reject'

export interface QaSummary {
  verdict?: string
  palette_leakage_fraction?: number
  unmapped_fraction?: number
  misalignment_score?: number
  suggested_tags?: string[]
  watermark_cropped?: boolean
}

export interface ReviewItem {
  id: string
  status: string
  qa: QaSummary
  photo_url: string
  mask_url: string
  overlay_url: string
  defect_tags: string[]
  note: string
}

export interface TaxonomyClass {
  id: number
  name: string
  rank: string
  colour: [number, number, number]
}

export interface Taxonomy {
  ignore_index: number
  classes: TaxonomyClass[]
}

export interface ServerStats {
  pending: number
  accepted: number
  rejected: number
  decided: number
  qa_rejected: number
  mean_duration_ms: number | null
  acceptance_rate_reviewed: number
  acceptance_rate_overall: number
}

export interface DecisionPayload {
  verdict: Verdict
  tags: DefectTag[]
  note: string
  duration_ms: number
}

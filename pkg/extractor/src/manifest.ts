/**
 * Dataset manifest writer.
 *
 * The manifest is a CSV with the exact header `sample_id,label,model,path`,
 * UTF-8, LF line endings, no quoting. Fields may not be empty or contain
 * commas, quotes, CR or LF; paths are relative to the manifest directory.
 */

export interface ManifestRow {
  sampleId: string
  label: string
  model: string
  path: string
}

export const MANIFEST_HEADER = 'sample_id,label,model,path'

function checkField(value: string, name: string, line: number): string {
  if (!value) {
    throw new Error(`manifest line ${line}: empty ${name}`)
  }
  if (/[,"\r\n]/.test(value)) {
    throw new Error(`manifest line ${line}: ${name} ${JSON.stringify(value)} contains a reserved character`)
  }
  return value
}

export function formatManifest(rows: ManifestRow[]): string {
  const lines = [MANIFEST_HEADER]
  rows.forEach((r, i) => {
    const line = i + 2
    lines.push(
      [
        checkField(r.sampleId, 'sample_id', line),
        checkField(r.label, 'label', line),
        checkField(r.model, 'model', line),
        checkField(r.path, 'path', line),
      ].join(','),
    )
  })
  return lines.join('\n') + '\n'
}

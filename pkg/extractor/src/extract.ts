/**
 * Feature extraction over a class-per-subfolder image tree.
 *
 * Every (image, backbone) pair yields one MSLF feature file; the run ends
 * with a manifest covering exactly the decodable images and a
 * preprocessing.json recording the per-backbone input recipe. Re-running
 * on identical inputs reproduces every output byte for byte.
 */

import * as fs from 'fs'
import * as path from 'path'
import * as tf from '@tensorflow/tfjs'
import { encodeFeature } from './mslf'
import { formatManifest, ManifestRow } from './manifest'
import { decodeImage, prepareInput, RawImage } from './image'
import { BACKBONES, buildBackbone, FEATURE_WIDTH } from './zoo'

export interface ExtractionJob {
  /** Root holding one subfolder per class; images anywhere below those. */
  imageRoot: string
  /** Backbone names; each must exist in the local zoo. */
  backbones: string[]
  outDir: string
  /** Images per forward pass. */
  batchSize?: number
  /** When true an undecodable image fails the run instead of being skipped. */
  strict?: boolean
  log?: (msg: string) => void
}

export interface ExtractionResult {
  manifestPath: string
  rows: ManifestRow[]
  /** Relative paths of images that did not decode (empty in strict mode). */
  skipped: string[]
}

interface Entry {
  sampleId: string
  label: string
  absPath: string
}

function listImages(imageRoot: string): Entry[] {
  const classes = fs
    .readdirSync(imageRoot, { withFileTypes: true })
    .filter((d) => d.isDirectory())
    .map((d) => d.name)
    .sort()
  if (classes.length === 0) {
    throw new Error(`${imageRoot}: no class subfolders`)
  }
  const entries: Entry[] = []
  for (const label of classes) {
    const walk = (dir: string) => {
      for (const d of fs.readdirSync(dir, { withFileTypes: true }).sort((a, b) => (a.name < b.name ? -1 : 1))) {
        const p = path.join(dir, d.name)
        if (d.isDirectory()) {
          walk(p)
        } else if (d.isFile()) {
          entries.push({
            sampleId: path.relative(imageRoot, p).split(path.sep).join('/'),
            label,
            absPath: p,
          })
        }
      }
    }
    walk(path.join(imageRoot, label))
  }
  return entries
}

function checkJob(job: ExtractionJob): void {
  if (job.backbones.length === 0) {
    throw new Error('at least one backbone is required')
  }
  const seen = new Set<string>()
  for (const name of job.backbones) {
    if (!BACKBONES[name]) {
      throw new Error(`unknown backbone '${name}' (known: ${Object.keys(BACKBONES).sort().join(', ')})`)
    }
    if (seen.has(name)) {
      throw new Error(`backbone '${name}' listed twice`)
    }
    seen.add(name)
  }
}

export async function extract(job: ExtractionJob): Promise<ExtractionResult> {
  checkJob(job)
  const log = job.log ?? ((msg: string) => console.warn(msg))
  const batchSize = job.batchSize ?? 8
  if (!Number.isInteger(batchSize) || batchSize < 1) {
    throw new Error(`batch size must be a positive integer, got ${batchSize}`)
  }
  await tf.setBackend('cpu')
  await tf.ready()

  // Decode up front so a bad image is excluded from every backbone's rows.
  const decoded: { entry: Entry; img: RawImage }[] = []
  const skipped: string[] = []
  for (const entry of listImages(job.imageRoot)) {
    try {
      decoded.push({ entry, img: decodeImage(fs.readFileSync(entry.absPath)) })
    } catch (err) {
      if (job.strict) {
        throw new Error(`${entry.sampleId}: ${(err as Error).message}`)
      }
      skipped.push(entry.sampleId)
      log(`skipping ${entry.sampleId}: ${(err as Error).message}`)
    }
  }
  if (decoded.length === 0) {
    throw new Error(`${job.imageRoot}: no decodable images`)
  }

  fs.mkdirSync(job.outDir, { recursive: true })
  const rows: ManifestRow[] = []
  for (const name of job.backbones) {
    const net = buildBackbone(name)
    for (let start = 0; start < decoded.length; start += batchSize) {
      const chunk = decoded.slice(start, start + batchSize)
      const inputs = chunk.map(({ img }) => prepareInput(img, net.input))
      const batch = tf.stack(inputs) as tf.Tensor4D
      inputs.forEach((t) => t.dispose())
      const features = net.run(batch)
      batch.dispose()
      const flat = features.dataSync() as Float32Array
      features.dispose()
      chunk.forEach(({ entry }, i) => {
        const rel = `features/${entry.sampleId}__${name}.mslf`
        const target = path.join(job.outDir, rel)
        fs.mkdirSync(path.dirname(target), { recursive: true })
        fs.writeFileSync(
          target,
          encodeFeature(flat.subarray(i * FEATURE_WIDTH, (i + 1) * FEATURE_WIDTH), [FEATURE_WIDTH], 'f32'),
        )
        rows.push({ sampleId: entry.sampleId, label: entry.label, model: name, path: rel })
      })
    }
    net.dispose()
  }

  rows.sort((a, b) =>
    a.sampleId !== b.sampleId ? (a.sampleId < b.sampleId ? -1 : 1) : a.model < b.model ? -1 : 1,
  )
  const manifestPath = path.join(job.outDir, 'manifest.csv')
  fs.writeFileSync(manifestPath, formatManifest(rows), 'utf-8')
  writePreprocessingDoc(job)
  return { manifestPath, rows, skipped }
}

/** Record the per-backbone recipe next to the manifest. */
function writePreprocessingDoc(job: ExtractionJob): void {
  const doc: Record<string, object> = {}
  for (const name of [...job.backbones].sort()) {
    const input = BACKBONES[name].input
    doc[name] = {
      resize: `bilinear, short side to ${input}`,
      crop: `center ${input}x${input}`,
      scale: 'x / 127.5 - 1',
      features: FEATURE_WIDTH,
    }
  }
  fs.writeFileSync(
    path.join(job.outDir, 'preprocessing.json'),
    JSON.stringify(doc, null, 2) + '\n',
    'utf-8',
  )
}

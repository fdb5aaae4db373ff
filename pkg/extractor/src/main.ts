/**
 * CLI: mslf-extract --images DIR --out DIR --backbones a,b [--batch N] [--strict]
 */

import { extract } from './extract'
import { BACKBONES } from './zoo'

function usage(): never {
  console.error('usage: mslf-extract --images DIR --out DIR --backbones NAME[,NAME...] [--batch N] [--strict]')
  console.error(`backbones: ${Object.keys(BACKBONES).sort().join(', ')}`)
  process.exit(2)
}

async function main() {
  const args = process.argv.slice(2)
  let images = ''
  let out = ''
  let backbones: string[] = []
  let batch = 8
  let strict = false
  for (let i = 0; i < args.length; i++) {
    switch (args[i]) {
      case '--images':
        images = args[++i] ?? ''
        break
      case '--out':
        out = args[++i] ?? ''
        break
      case '--backbones':
        backbones = (args[++i] ?? '').split(',').filter((s) => s.length > 0)
        break
      case '--batch':
        batch = Number(args[++i])
        break
      case '--strict':
        strict = true
        break
      default:
        usage()
    }
  }
  if (!images || !out || backbones.length === 0 || !Number.isInteger(batch) || batch < 1) {
    usage()
  }
  const result = await extract({ imageRoot: images, outDir: out, backbones, batchSize: batch, strict })
  console.log(`wrote ${result.rows.length} feature files, skipped ${result.skipped.length} images`)
  console.log(`manifest: ${result.manifestPath}`)
}

main().catch((err) => {
  console.error(`error: ${err.message}`)
  process.exit(1)
})

/**
 * Minimal single-channel 8-bit PNG codec.
 *
 * The encoder emits stored (uncompressed) deflate blocks, so it needs no zlib
 * implementation and produces byte-stable output in any runtime — exactly what
 * the lossless 0/255 mask export contract wants. The decoder handles what the
 * server produces (color type 0, bit depth 8, non-interlaced, filters 0-4);
 * the caller supplies the inflate function (node:zlib in tests).
 */

const PNG_SIGNATURE = [137, 80, 78, 71, 13, 10, 26, 10];

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
})();

function crc32(bytes: Uint8Array): number {
  let crc = 0xffffffff;
  for (let i = 0; i < bytes.length; i++) {
    crc = CRC_TABLE[(crc ^ bytes[i]!) & 0xff]! ^ (crc >>> 8);
  }
  return (crc ^ 0xffffffff) >>> 0;
}

function adler32(bytes: Uint8Array): number {
  let a = 1;
  let b = 0;
  for (let i = 0; i < bytes.length; i++) {
    a = (a + bytes[i]!) % 65521;
    b = (b + a) % 65521;
  }
  return ((b << 16) | a) >>> 0;
}

function be32(value: number): Uint8Array {
  return new Uint8Array([(value >>> 24) & 0xff, (value >>> 16) & 0xff, (value >>> 8) & 0xff, value & 0xff]);
}

function chunk(type: string, data: Uint8Array): Uint8Array {
  const typeBytes = new TextEncoder().encode(type);
  const body = new Uint8Array(typeBytes.length + data.length);
  body.set(typeBytes, 0);
  body.set(data, typeBytes.length);
  const out = new Uint8Array(4 + body.length + 4);
  out.set(be32(data.length), 0);
  out.set(body, 4);
  out.set(be32(crc32(body)), 4 + body.length);
  return out;
}

/** Raw gray bytes -> zlib stream of stored deflate blocks. */
function zlibStored(raw: Uint8Array): Uint8Array {
  const pieces: Uint8Array[] = [new Uint8Array([0x78, 0x01])];
  const blockSize = 65535;
  for (let offset = 0; offset < raw.length || offset === 0; offset += blockSize) {
    const slice = raw.subarray(offset, Math.min(offset + blockSize, raw.length));
    const final = offset + blockSize >= raw.length ? 1 : 0;
    const header = new Uint8Array(5);
    header[0] = final;
    header[1] = slice.length & 0xff;
    header[2] = (slice.length >>> 8) & 0xff;
    header[3] = ~slice.length & 0xff;
    header[4] = (~slice.length >>> 8) & 0xff;
    pieces.push(header, slice);
    if (raw.length === 0) break;
  }
  pieces.push(be32(adler32(raw)));
  let total = 0;
  for (const piece of pieces) total += piece.length;
  const out = new Uint8Array(total);
  let at = 0;
  for (const piece of pieces) {
    out.set(piece, at);
    at += piece.length;
  }
  return out;
}

/** Encode one gray (0-255) byte per pixel, row-major, as a grayscale PNG. */
export function encodeGrayPng(width: number, height: number, gray: Uint8Array): Uint8Array {
  if (gray.length !== width * height) {
    throw new Error(`gray buffer length ${gray.length} != ${width}x${height}`);
  }
  const ihdr = new Uint8Array(13);
  ihdr.set(be32(width), 0);
  ihdr.set(be32(height), 4);
  ihdr[8] = 8; // bit depth
  ihdr[9] = 0; // color type: grayscale
  // scanlines: filter byte 0 + row bytes
  const raw = new Uint8Array(height * (width + 1));
  for (let y = 0; y < height; y++) {
    raw[y * (width + 1)] = 0;
    raw.set(gray.subarray(y * width, (y + 1) * width), y * (width + 1) + 1);
  }
  const pieces = [
    new Uint8Array(PNG_SIGNATURE),
    chunk("IHDR", ihdr),
    chunk("IDAT", zlibStored(raw)),
    chunk("IEND", new Uint8Array(0)),
  ];
  let total = 0;
  for (const piece of pieces) total += piece.length;
  const out = new Uint8Array(total);
  let at = 0;
  for (const piece of pieces) {
    out.set(piece, at);
    at += piece.length;
  }
  return out;
}

export interface GrayImage {
  width: number;
  height: number;
  gray: Uint8Array;
}

function paeth(a: number, b: number, c: number): number {
  const p = a + b - c;
  const pa = Math.abs(p - a);
  const pb = Math.abs(p - b);
  const pc = Math.abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

/**
 * Decode a grayscale PNG (color type 0, bit depth 8, non-interlaced).
 * ``inflate`` must unwrap a zlib stream (e.g. node:zlib inflateSync).
 */
export function decodeGrayPng(
  bytes: Uint8Array,
  inflate: (compressed: Uint8Array) => Uint8Array,
): GrayImage {
  for (let i = 0; i < 8; i++) {
    if (bytes[i] !== PNG_SIGNATURE[i]) throw new Error("not a PNG");
  }
  let at = 8;
  let width = 0;
  let height = 0;
  const idat: Uint8Array[] = [];
  while (at < bytes.length) {
    const view = new DataView(bytes.buffer, bytes.byteOffset + at);
    const length = view.getUint32(0);
    const type = new TextDecoder().decode(bytes.subarray(at + 4, at + 8));
    const data = bytes.subarray(at + 8, at + 8 + length);
    if (type === "IHDR") {
      const header = new DataView(data.buffer, data.byteOffset);
      width = header.getUint32(0);
      height = header.getUint32(4);
      if (data[8] !== 8 || data[9] !== 0) {
        throw new Error(`unsupported PNG: bit depth ${data[8]}, color type ${data[9]}`);
      }
      if (data[12] !== 0) throw new Error("interlaced PNGs are not supported");
    } else if (type === "IDAT") {
      idat.push(data);
    } else if (type === "IEND") {
      break;
    }
    at += 12 + length;
  }
  let compressedLength = 0;
  for (const piece of idat) compressedLength += piece.length;
  const compressed = new Uint8Array(compressedLength);
  let offset = 0;
  for (const piece of idat) {
    compressed.set(piece, offset);
    offset += piece.length;
  }
  const raw = inflate(compressed);
  const stride = width + 1;
  if (raw.length !== stride * height) {
    throw new Error(`unexpected scanline data length ${raw.length}`);
  }
  const gray = new Uint8Array(width * height);
  for (let y = 0; y < height; y++) {
    const filter = raw[y * stride]!;
    for (let x = 0; x < width; x++) {
      const value = raw[y * stride + 1 + x]!;
      const left = x > 0 ? gray[y * width + x - 1]! : 0;
      const up = y > 0 ? gray[(y - 1) * width + x]! : 0;
      const upLeft = x > 0 && y > 0 ? gray[(y - 1) * width + x - 1]! : 0;
      let out: number;
      switch (filter) {
        case 0:
          out = value;
          break;
        case 1:
          out = value + left;
          break;
        case 2:
          out = value + up;
          break;
        case 3:
          out = value + Math.floor((left + up) / 2);
          break;
        case 4:
          out = value + paeth(left, up, upLeft);
          break;
        default:
          throw new Error(`unsupported PNG filter ${filter}`);
      }
      gray[y * width + x] = out & 0xff;
    }
  }
  return { width, height, gray };
}

/**
 * Minimal WKT reader for the four geometry kinds the service emits:
 * POINT, LINESTRING, POLYGON, and MULTIPOLYGON. Coordinates arrive
 * longitude first, matching the wire format.
 */

export type Position = [number, number];

export type Geom =
  | { kind: "point"; coordinates: Position }
  | { kind: "linestring"; coordinates: Position[] }
  | { kind: "polygon"; rings: Position[][] }
  | { kind: "multipolygon"; polygons: Position[][][] };

export class WktError extends Error {}

type Nested = Position | Nested[];

/** Parse one parenthesized group into nested arrays of positions. */
function parseGroup(text: string, start: number): [Nested, number] {
  if (text[start] !== "(") {
    throw new WktError(`expected "(" at offset ${start}`);
  }
  const items: Nested[] = [];
  let i = start + 1;
  for (;;) {
    while (text[i] === " ") i++;
    if (text[i] === "(") {
      const [child, next] = parseGroup(text, i);
      items.push(child);
      i = next;
    } else {
      const end = findDelimiter(text, i);
      const pair = parsePosition(text.slice(i, end));
      items.push(pair);
      i = end;
    }
    while (text[i] === " ") i++;
    if (text[i] === ",") {
      i++;
      continue;
    }
    if (text[i] === ")") {
      return [items, i + 1];
    }
    throw new WktError(`expected "," or ")" at offset ${i}`);
  }
}

function findDelimiter(text: string, start: number): number {
  for (let i = start; i < text.length; i++) {
    if (text[i] === "," || text[i] === ")") return i;
  }
  throw new WktError("unterminated coordinate list");
}

function parsePosition(chunk: string): Position {
  const parts = chunk.trim().split(/\s+/);
  if (parts.length !== 2) {
    throw new WktError(`expected "x y", got "${chunk.trim()}"`);
  }
  const x = Number(parts[0]);
  const y = Number(parts[1]);
  if (!Number.isFinite(x) || !Number.isFinite(y)) {
    throw new WktError(`non-numeric coordinate in "${chunk.trim()}"`);
  }
  return [x, y];
}

function isPosition(node: Nested): node is Position {
  return node.length === 2 && typeof node[0] === "number";
}

function asPositions(node: Nested, what: string): Position[] {
  if (isPosition(node) || !node.every(isPosition)) {
    throw new WktError(`${what} must be a list of coordinate pairs`);
  }
  return node as Position[];
}

function asRings(node: Nested, what: string): Position[][] {
  if (isPosition(node)) {
    throw new WktError(`${what} must be a list of rings`);
  }
  return node.map((ring, i) => asPositions(ring, `${what} ring ${i}`));
}

export function parseWkt(text: string): Geom {
  const match = /^\s*([A-Za-z]+)\s*(\(.*\))\s*$/s.exec(text);
  if (!match) {
    throw new WktError(`not WKT: "${text.slice(0, 40)}"`);
  }
  const keyword = match[1].toUpperCase();
  const [body] = parseGroup(match[2], 0);
  switch (keyword) {
    case "POINT": {
      if (isPosition(body) || body.length !== 1 || !isPosition(body[0])) {
        throw new WktError("POINT takes a single coordinate pair");
      }
      return { kind: "point", coordinates: body[0] };
    }
    case "LINESTRING":
      return { kind: "linestring", coordinates: asPositions(body, "LINESTRING") };
    case "POLYGON":
      return { kind: "polygon", rings: asRings(body, "POLYGON") };
    case "MULTIPOLYGON": {
      if (isPosition(body)) {
        throw new WktError("MULTIPOLYGON must be a list of polygons");
      }
      return {
        kind: "multipolygon",
        polygons: body.map((poly, i) => asRings(poly, `polygon ${i}`)),
      };
    }
    default:
      throw new WktError(`unsupported geometry: ${keyword}`);
  }
}

/** Every coordinate pair of the geometry, in serialization order. */
export function positionsOf(geom: Geom): Position[] {
  switch (geom.kind) {
    case "point":
      return [geom.coordinates];
    case "linestring":
      return geom.coordinates;
    case "polygon":
      return geom.rings.flat();
    case "multipolygon":
      return geom.polygons.flat(2);
  }
}

/** Bounding box as [[minLon, minLat], [maxLon, maxLat]]. */
export function geomBounds(geom: Geom): [Position, Position] {
  const positions = positionsOf(geom);
  let minX = Infinity;
  let minY = Infinity;
  let maxX = -Infinity;
  let maxY = -Infinity;
  for (const [x, y] of positions) {
    if (x < minX) minX = x;
    if (y < minY) minY = y;
    if (x > maxX) maxX = x;
    if (y > maxY) maxY = y;
  }
  return [
    [minX, minY],
    [maxX, maxY],
  ];
}

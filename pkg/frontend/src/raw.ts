/**
 * JSON parsing that preserves number literals exactly as the server sent
 * them.
 *
 * `JSON.parse` collapses `0.0` to `0` and `1e-8` to `1e-8`-the-double, so a
 * round-trip through `String()` can print a different spelling than the API
 * body. The UI's display layer therefore reads numbers from this parallel
 * parse, which keeps the verbatim character slice for every numeric token.
 */

export type RawValue =
  | { kind: "object"; entries: ReadonlyArray<readonly [string, RawValue]> }
  | { kind: "array"; items: ReadonlyArray<RawValue> }
  | { kind: "string"; value: string }
  | { kind: "number"; literal: string; value: number }
  | { kind: "boolean"; value: boolean }
  | { kind: "null" };

export type PathSegment = string | number;

const NUMBER_RE = /-?(?:0|[1-9]\d*)(?:\.\d+)?(?:[eE][+-]?\d+)?/y;

class Parser {
  private pos = 0;

  constructor(private readonly text: string) {}

  parse(): RawValue {
    this.skipWhitespace();
    const value = this.parseValue();
    this.skipWhitespace();
    if (this.pos !== this.text.length) {
      throw new SyntaxError(`unexpected trailing input at offset ${this.pos}`);
    }
    return value;
  }

  private fail(what: string): never {
    throw new SyntaxError(`${what} at offset ${this.pos}`);
  }

  private skipWhitespace(): void {
    while (this.pos < this.text.length) {
      const ch = this.text[this.pos];
      if (ch === " " || ch === "\t" || ch === "\n" || ch === "\r") {
        this.pos += 1;
      } else {
        break;
      }
    }
  }

  private parseValue(): RawValue {
    const ch = this.text[this.pos];
    if (ch === undefined) this.fail("unexpected end of input");
    if (ch === "{") return this.parseObject();
    if (ch === "[") return this.parseArray();
    if (ch === '"') return { kind: "string", value: this.parseString() };
    if (ch === "t") return this.parseKeyword("true", { kind: "boolean", value: true });
    if (ch === "f") return this.parseKeyword("false", { kind: "boolean", value: false });
    if (ch === "n") return this.parseKeyword("null", { kind: "null" });
    return this.parseNumber();
  }

  private parseKeyword(word: string, value: RawValue): RawValue {
    if (this.text.startsWith(word, this.pos)) {
      this.pos += word.length;
      return value;
    }
    this.fail(`invalid literal`);
  }

  private parseNumber(): RawValue {
    NUMBER_RE.lastIndex = this.pos;
    const match = NUMBER_RE.exec(this.text);
    if (match === null || match.index !== this.pos) this.fail("invalid number");
    const literal = match[0];
    this.pos += literal.length;
    return { kind: "number", literal, value: Number(literal) };
  }

  private parseString(): string {
    // Caller guarantees the opening quote.
    this.pos += 1;
    let out = "";
    for (;;) {
      const ch = this.text[this.pos];
      if (ch === undefined) this.fail("unterminated string");
      if (ch === '"') {
        this.pos += 1;
        return out;
      }
      if (ch === "\\") {
        const esc = this.text[this.pos + 1];
        this.pos += 2;
        switch (esc) {
          case '"':
            out += '"';
            break;
          case "\\":
            out += "\\";
            break;
          case "/":
            out += "/";
            break;
          case "b":
            out += "\b";
            break;
          case "f":
            out += "\f";
            break;
          case "n":
            out += "\n";
            break;
          case "r":
            out += "\r";
            break;
          case "t":
            out += "\t";
            break;
          case "u": {
            const hex = this.text.slice(this.pos, this.pos + 4);
            if (!/^[0-9a-fA-F]{4}$/.test(hex)) this.fail("invalid unicode escape");
            out += String.fromCharCode(parseInt(hex, 16));
            this.pos += 4;
            break;
          }
          default:
            this.fail("invalid escape");
        }
      } else {
        out += ch;
        this.pos += 1;
      }
    }
  }

  private parseObject(): RawValue {
    this.pos += 1; // {
    const entries: Array<readonly [string, RawValue]> = [];
    this.skipWhitespace();
    if (this.text[this.pos] === "}") {
      this.pos += 1;
      return { kind: "object", entries };
    }
    for (;;) {
      this.skipWhitespace();
      if (this.text[this.pos] !== '"') this.fail("expected object key");
      const key = this.parseString();
      this.skipWhitespace();
      if (this.text[this.pos] !== ":") this.fail("expected ':'");
      this.pos += 1;
      this.skipWhitespace();
      entries.push([key, this.parseValue()] as const);
      this.skipWhitespace();
      const ch = this.text[this.pos];
      if (ch === ",") {
        this.pos += 1;
        continue;
      }
      if (ch === "}") {
        this.pos += 1;
        return { kind: "object", entries };
      }
      this.fail("expected ',' or '}'");
    }
  }

  private parseArray(): RawValue {
    this.pos += 1; // [
    const items: RawValue[] = [];
    this.skipWhitespace();
    if (this.text[this.pos] === "]") {
      this.pos += 1;
      return { kind: "array", items };
    }
    for (;;) {
      this.skipWhitespace();
      items.push(this.parseValue());
      this.skipWhitespace();
      const ch = this.text[this.pos];
      if (ch === ",") {
        this.pos += 1;
        continue;
      }
      if (ch === "]") {
        this.pos += 1;
        return { kind: "array", items };
      }
      this.fail("expected ',' or ']'");
    }
  }
}

/** Parse JSON text into a tree whose numbers carry their exact source literal. */
export function parseRaw(text: string): RawValue {
  return new Parser(text).parse();
}

/** Walk a parsed tree by object keys and array indices. */
export function rawAt(root: RawValue, path: ReadonlyArray<PathSegment>): RawValue | undefined {
  let node: RawValue | undefined = root;
  for (const seg of path) {
    if (node === undefined) return undefined;
    if (typeof seg === "number") {
      if (node.kind !== "array") return undefined;
      node = node.items[seg];
    } else {
      if (node.kind !== "object") return undefined;
      const hit = node.entries.find(([k]) => k === seg);
      node = hit?.[1];
    }
  }
  return node;
}

/**
 * The verbatim number literal at `path`, or undefined when the path does not
 * resolve to a number (including JSON null).
 */
export function literalAt(root: RawValue, path: ReadonlyArray<PathSegment>): string | undefined {
  const node = rawAt(root, path);
  return node?.kind === "number" ? node.literal : undefined;
}

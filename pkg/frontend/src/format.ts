/** Display helpers. The UI never reformats server numbers: a value either
 * passes through as its verbatim literal or renders as the em-dash
 * placeholder. */

export const MISSING = "—";

/** Verbatim passthrough for a server number literal; placeholder otherwise. */
export function displayNumber(literal: string | null | undefined): string {
  return literal ?? MISSING;
}

export function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;")
    .replaceAll("'", "&#39;");
}

export type ApcDirection = "apc-up" | "apc-down" | "apc-flat";

/** Sign class for an APC badge: positive = metric worsened, negative =
 * improvement, zero = flat. The sign test is the only numeric logic the UI
 * performs — the displayed value itself stays verbatim. */
export function apcDirection(apc: number): ApcDirection {
  if (apc > 0) return "apc-up";
  if (apc < 0) return "apc-down";
  return "apc-flat";
}

export const APC_ARROWS: Record<ApcDirection, string> = {
  "apc-up": "▲",
  "apc-down": "▼",
  "apc-flat": "•",
};

export interface Chip {
  cls: "chip sig" | "chip nosig";
  text: string;
}

/** Significance chip straight from the server's verdict; `alphaLiteral` is
 * the report's alpha exactly as transmitted. */
export function significanceChip(significant: boolean, alphaLiteral: string): Chip {
  return significant
    ? { cls: "chip sig", text: `significant @${alphaLiteral}` }
    : { cls: "chip nosig", text: "not significant" };
}

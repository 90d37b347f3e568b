/** Sensitivity report rendering.
 *
 * The renderer takes the verbatim response body text, parses it twice — once
 * for structure, once for the exact number literals — and emits HTML in
 * which every displayed number is the API's own spelling, character for
 * character. The UI performs no metric arithmetic: the only numeric logic is
 * the sign test that picks a badge color.
 */

import {
  APC_ARROWS,
  apcDirection,
  displayNumber,
  escapeHtml,
  significanceChip,
} from "./format.js";
import { literalAt, parseRaw } from "./raw.js";
import type { ScenarioReportWire } from "./types.js";

export function renderSensitivityReport(bodyText: string): string {
  const report = JSON.parse(bodyText) as ScenarioReportWire;
  const raw = parseRaw(bodyText);

  const alphaLiteral = displayNumber(literalAt(raw, ["alpha"]));
  const parts: string[] = [];
  parts.push('<section class="sensitivity-report">');
  parts.push(
    `<header><h2>${escapeHtml(report.discipline)} supply sensitivity</h2>` +
      `<p class="meta">scenario <code>${escapeHtml(report.scenario_id)}</code>` +
      ` · ${displayNumber(literalAt(raw, ["replications"]))} replications` +
      ` · α ${alphaLiteral}` +
      ` · seed ${displayNumber(literalAt(raw, ["seed"]))}</p></header>`,
  );

  if (report.rows.length === 0) {
    parts.push('<p class="empty-state">The report has no rows.</p>');
    parts.push("</section>");
    return parts.join("");
  }

  parts.push("<table><thead><tr>");
  for (const h of ["Δ caregivers", "metric", "baseline", "scenario", "APC", "t", "p", "verdict"]) {
    parts.push(`<th>${escapeHtml(h)}</th>`);
  }
  parts.push("</tr></thead><tbody>");

  report.rows.forEach((row, i) => {
    const deltaLit = displayNumber(literalAt(raw, ["rows", i, "delta"]));
    const baseLit = displayNumber(literalAt(raw, ["rows", i, "baseline_mean"]));
    const altLit = displayNumber(literalAt(raw, ["rows", i, "alt_mean"]));
    const apcLit = displayNumber(literalAt(raw, ["rows", i, "apc"]));
    const tLit = displayNumber(literalAt(raw, ["rows", i, "t_stat"]));
    const pLit = displayNumber(literalAt(raw, ["rows", i, "p_value"]));
    const direction = apcDirection(row.apc);
    const chip = significanceChip(row.significant, alphaLiteral);
    parts.push(
      "<tr>" +
        `<td class="delta">${deltaLit}</td>` +
        `<td class="metric">${escapeHtml(row.metric)}</td>` +
        `<td class="num">${baseLit}</td>` +
        `<td class="num">${altLit}</td>` +
        `<td><span class="badge ${direction}">${APC_ARROWS[direction]} ${apcLit}%</span></td>` +
        `<td class="num">${tLit}</td>` +
        `<td class="num">${pLit}</td>` +
        `<td><span class="${chip.cls}">${escapeHtml(chip.text)}</span></td>` +
        "</tr>",
    );
  });

  parts.push("</tbody></table></section>");
  return parts.join("");
}

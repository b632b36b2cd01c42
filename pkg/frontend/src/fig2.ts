// Penalty/energy trade-off: one point per energy price η, plotted as penalty
// rate (y) against energy rate (x), connected in ascending-η order with the
// direction of increasing η marked by an arrowhead. Each point is labeled
// with its η so the curve can be read without a colorbar.

import { column, parseCsv } from "./csv";
import {
    axes,
    dataExtent,
    document,
    escapeXml,
    fmtNum,
    makeFrame,
    markers,
} from "./svg";

export const FIG2_COLUMNS = [
    "eta",
    "penalty_mean",
    "penalty_se",
    "energy_mean",
    "energy_se",
];

const CURVE_COLOR = "#7a3b8f";

export function renderFig2(csvText: string): string {
    const table = parseCsv(csvText, FIG2_COLUMNS);

    const eta = column(table, "eta");
    const penalty = column(table, "penalty_mean");
    const penaltySe = column(table, "penalty_se");
    const energy = column(table, "energy_mean");
    const energySe = column(table, "energy_se");

    // The curve only makes sense traversed in η order, so sort rows by η no
    // matter how the file was written.
    const order = eta.map((_, i) => i).sort((a, b) => eta[a] - eta[b]);

    const xValues: number[] = [];
    const yValues: number[] = [];
    for (const i of order) {
        xValues.push(energy[i]);
        yValues.push(penalty[i]);
        if (Number.isFinite(energySe[i])) {
            xValues.push(energy[i] - energySe[i], energy[i] + energySe[i]);
        }
        if (Number.isFinite(penaltySe[i])) {
            yValues.push(penalty[i] - penaltySe[i], penalty[i] + penaltySe[i]);
        }
    }
    // dataExtent widens an all-equal column (e.g. every run spent zero
    // energy) to a unit span so the plot never collapses to zero width.
    const frame = makeFrame(dataExtent(xValues), dataExtent(yValues));

    const pts = order.map(
        (i) =>
            [frame.x.map(energy[i]), frame.y.map(penalty[i])] as [
                number,
                number,
            ]
    );

    const bars: string[] = [];
    for (const i of order) {
        const px = frame.x.map(energy[i]);
        const py = frame.y.map(penalty[i]);
        if (Number.isFinite(penaltySe[i])) {
            const lo = frame.y.map(penalty[i] - penaltySe[i]);
            const hi = frame.y.map(penalty[i] + penaltySe[i]);
            bars.push(
                `<line class="errorbar" x1="${px}" y1="${lo}" x2="${px}" y2="${hi}" ` +
                    `stroke="${CURVE_COLOR}" stroke-width="1"/>`
            );
        }
        if (Number.isFinite(energySe[i])) {
            const lo = frame.x.map(energy[i] - energySe[i]);
            const hi = frame.x.map(energy[i] + energySe[i]);
            bars.push(
                `<line class="errorbar" x1="${lo}" y1="${py}" x2="${hi}" y2="${py}" ` +
                    `stroke="${CURVE_COLOR}" stroke-width="1"/>`
            );
        }
    }

    const labels = order.map((i, k) => {
        const [px, py] = pts[k];
        return (
            `<text class="eta-label" x="${px + 7}" y="${py - 7}" ` +
            `font-family="sans-serif" font-size="11" fill="#333">` +
            `${escapeXml(`η=${fmtNum(eta[i])}`)}</text>`
        );
    });

    const arrowDefs =
        `<defs><marker id="eta-arrow" viewBox="0 0 10 10" refX="8" refY="5" ` +
        `markerWidth="7" markerHeight="7" orient="auto-start-reverse">` +
        `<path d="M 0 0 L 10 5 L 0 10 z" fill="${CURVE_COLOR}"/></marker></defs>`;

    const pathPts = pts.map(([px, py]) => `${px},${py}`).join(" ");
    const curve =
        pts.length > 1
            ? `<polyline class="eta-path" points="${pathPts}" fill="none" ` +
              `stroke="${CURVE_COLOR}" stroke-width="1.8" marker-end="url(#eta-arrow)"/>`
            : "";

    const note =
        `<text class="eta-direction" x="${frame.x.range.min + 8}" ` +
        `y="${frame.y.range.max + 14}" font-family="sans-serif" ` +
        `font-size="12" fill="#333">arrow: increasing η</text>`;

    const body = [
        axes(
            frame,
            "energy per client per slot",
            "late deliveries per client per slot"
        ),
        arrowDefs,
        `<g class="series series-tradeoff">`,
        curve,
        `<g class="errorbars">`,
        ...bars,
        `</g>`,
        markers(pts, CURVE_COLOR, "points"),
        ...labels,
        `</g>`,
        note,
    ].join("\n");

    return document(frame, body);
}

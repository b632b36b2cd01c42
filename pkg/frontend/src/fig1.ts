// Cost vs fleet size: the relaxation lower bound as a reference line and the
// simulated index policy as a line with markers and ±1 standard-error bars.

import { column, parseCsv } from "./csv";
import {
    axes,
    dataExtent,
    document,
    makeFrame,
    markers,
    polyline,
} from "./svg";

export const FIG1_COLUMNS = ["N", "bound", "whittle_mean", "whittle_se"];

const BOUND_COLOR = "#c0392b";
const WHITTLE_COLOR = "#2c5f8a";

export function renderFig1(csvText: string): string {
    const table = parseCsv(csvText, FIG1_COLUMNS);

    const n = column(table, "N");
    const bound = column(table, "bound");
    const mean = column(table, "whittle_mean");
    const se = column(table, "whittle_se");

    // Rows arrive sorted by N from the producer, but sorting here costs
    // nothing and keeps the connecting lines sane for hand-edited files.
    const order = n.map((_, i) => i).sort((a, b) => n[a] - n[b]);

    const yValues: number[] = [];
    for (const i of order) {
        yValues.push(bound[i], mean[i]);
        if (Number.isFinite(se[i])) {
            yValues.push(mean[i] - se[i], mean[i] + se[i]);
        }
    }
    const frame = makeFrame(dataExtent(n), dataExtent(yValues));

    const boundPts = order.map(
        (i) => [frame.x.map(n[i]), frame.y.map(bound[i])] as [number, number]
    );
    const meanPts = order.map(
        (i) => [frame.x.map(n[i]), frame.y.map(mean[i])] as [number, number]
    );

    const bars: string[] = [];
    for (const i of order) {
        if (!Number.isFinite(se[i])) {
            continue; // single-replication runs carry no standard error
        }
        const px = frame.x.map(n[i]);
        const lo = frame.y.map(mean[i] - se[i]);
        const hi = frame.y.map(mean[i] + se[i]);
        bars.push(
            `<line class="errorbar" x1="${px}" y1="${lo}" x2="${px}" y2="${hi}" ` +
                `stroke="${WHITTLE_COLOR}" stroke-width="1"/>`
        );
        for (const py of [lo, hi]) {
            bars.push(
                `<line class="errorbar-cap" x1="${px - 3}" y1="${py}" ` +
                    `x2="${px + 3}" y2="${py}" stroke="${WHITTLE_COLOR}" stroke-width="1"/>`
            );
        }
    }

    const legendX = frame.x.range.max - 170;
    const legendY = frame.y.range.max + 8;
    const legend =
        `<g class="legend" font-family="sans-serif" font-size="12" fill="#000">\n` +
        `<line x1="${legendX}" y1="${legendY}" x2="${legendX + 26}" y2="${legendY}" ` +
        `stroke="${BOUND_COLOR}" stroke-width="1.8" stroke-dasharray="6 3"/>\n` +
        `<text x="${legendX + 32}" y="${legendY + 4}">relaxation lower bound</text>\n` +
        `<line x1="${legendX}" y1="${legendY + 18}" x2="${legendX + 26}" y2="${legendY + 18}" ` +
        `stroke="${WHITTLE_COLOR}" stroke-width="1.8"/>\n` +
        `<circle cx="${legendX + 13}" cy="${legendY + 18}" r="3.2" fill="${WHITTLE_COLOR}"/>\n` +
        `<text x="${legendX + 32}" y="${legendY + 22}">index policy (±1 se)</text>\n` +
        `</g>`;

    const body = [
        axes(frame, "clients N", "time-average cost per client"),
        `<g class="series series-bound">`,
        polyline(boundPts, BOUND_COLOR, "line", "6 3"),
        markers(boundPts, BOUND_COLOR, "points"),
        `</g>`,
        `<g class="series series-whittle">`,
        polyline(meanPts, WHITTLE_COLOR, "line"),
        `<g class="errorbars">`,
        ...bars,
        `</g>`,
        markers(meanPts, WHITTLE_COLOR, "points"),
        `</g>`,
        legend,
    ].join("\n");

    return document(frame, body);
}

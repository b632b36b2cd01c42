// Small hand-rolled SVG toolkit: linear scales, tick picking, and the shared
// plot frame (axes, grid, labels). Output is plain markup with class names on
// every logical group so tests — and anyone post-processing the image — can
// find series structurally instead of by pixel colors.

export interface Extent {
    min: number;
    max: number;
}

// Extent of the finite values, widened so degenerate data still spans
// something drawable: a single value (or all-equal values) gets half a unit
// of room on each side, and an ordinary range gets a small relative pad.
export function dataExtent(values: number[], padFraction = 0.06): Extent {
    const finite = values.filter((v) => Number.isFinite(v));
    if (finite.length === 0) {
        return { min: -0.5, max: 0.5 };
    }
    let min = Math.min(...finite);
    let max = Math.max(...finite);
    if (min === max) {
        min -= 0.5;
        max += 0.5;
    } else {
        const pad = (max - min) * padFraction;
        min -= pad;
        max += pad;
    }
    return { min, max };
}

export class LinearScale {
    constructor(
        public readonly domain: Extent,
        public readonly range: Extent
    ) {}

    map(x: number): number {
        const { domain, range } = this;
        const t = (x - domain.min) / (domain.max - domain.min);
        return range.min + t * (range.max - range.min);
    }
}

// Round tick steps (1/2/5 times a power of ten) covering the extent.
export function ticks(extent: Extent, count = 5): number[] {
    const span = extent.max - extent.min;
    if (!(span > 0) || !Number.isFinite(span)) {
        return [extent.min];
    }
    const rawStep = span / Math.max(1, count);
    const mag = Math.pow(10, Math.floor(Math.log10(rawStep)));
    let step = mag;
    for (const m of [1, 2, 5, 10]) {
        if (mag * m >= rawStep) {
            step = mag * m;
            break;
        }
    }
    const out: number[] = [];
    const first = Math.ceil(extent.min / step) * step;
    for (let v = first; v <= extent.max + step * 1e-9; v += step) {
        out.push(Math.abs(v) < step * 1e-9 ? 0 : v);
    }
    return out;
}

// Compact numeric label: enough digits to tell ticks apart, no float noise.
export function fmtNum(x: number): string {
    if (!Number.isFinite(x)) {
        return String(x);
    }
    return String(parseFloat(x.toPrecision(6)));
}

export function escapeXml(text: string): string {
    return text
        .replace(/&/g, "&amp;")
        .replace(/</g, "&lt;")
        .replace(/>/g, "&gt;")
        .replace(/"/g, "&quot;");
}

export interface Frame {
    width: number;
    height: number;
    x: LinearScale;
    y: LinearScale;
}

export function makeFrame(
    xDomain: Extent,
    yDomain: Extent,
    width = 640,
    height = 440
): Frame {
    const margin = { left: 72, right: 24, top: 24, bottom: 56 };
    return {
        width,
        height,
        x: new LinearScale(xDomain, {
            min: margin.left,
            max: width - margin.right,
        }),
        // SVG y grows downward, so the range is flipped.
        y: new LinearScale(yDomain, {
            min: height - margin.bottom,
            max: margin.top,
        }),
    };
}

export function axes(frame: Frame, xLabel: string, yLabel: string): string {
    const { x, y } = frame;
    const left = x.range.min;
    const right = x.range.max;
    const bottom = y.range.min;
    const top = y.range.max;
    const parts: string[] = [];

    parts.push(`<g class="axes" stroke="#444" fill="none">`);
    parts.push(
        `<line x1="${left}" y1="${bottom}" x2="${right}" y2="${bottom}"/>`
    );
    parts.push(`<line x1="${left}" y1="${bottom}" x2="${left}" y2="${top}"/>`);
    parts.push(`</g>`);

    parts.push(
        `<g class="ticks" font-family="sans-serif" font-size="11" fill="#222">`
    );
    for (const t of ticks(x.domain)) {
        const px = x.map(t);
        parts.push(
            `<line x1="${px}" y1="${bottom}" x2="${px}" y2="${bottom + 5}" stroke="#444"/>`
        );
        parts.push(
            `<text x="${px}" y="${bottom + 18}" text-anchor="middle">` +
                `${escapeXml(fmtNum(t))}</text>`
        );
    }
    for (const t of ticks(y.domain)) {
        const py = y.map(t);
        parts.push(
            `<line x1="${left - 5}" y1="${py}" x2="${left}" y2="${py}" stroke="#444"/>`
        );
        parts.push(
            `<text x="${left - 8}" y="${py + 4}" text-anchor="end">` +
                `${escapeXml(fmtNum(t))}</text>`
        );
    }
    parts.push(`</g>`);

    const midX = (left + right) / 2;
    const midY = (top + bottom) / 2;
    parts.push(
        `<g class="axis-labels" font-family="sans-serif" font-size="13" fill="#000">`
    );
    parts.push(
        `<text x="${midX}" y="${frame.height - 12}" text-anchor="middle">` +
            `${escapeXml(xLabel)}</text>`
    );
    parts.push(
        `<text x="18" y="${midY}" text-anchor="middle" ` +
            `transform="rotate(-90 18 ${midY})">${escapeXml(yLabel)}</text>`
    );
    parts.push(`</g>`);
    return parts.join("\n");
}

export function polyline(
    points: Array<[number, number]>,
    stroke: string,
    cls: string,
    dash = ""
): string {
    const pts = points.map(([px, py]) => `${px},${py}`).join(" ");
    const dashAttr = dash === "" ? "" : ` stroke-dasharray="${dash}"`;
    return (
        `<polyline class="${cls}" points="${pts}" fill="none" ` +
        `stroke="${stroke}" stroke-width="1.8"${dashAttr}/>`
    );
}

export function markers(
    points: Array<[number, number]>,
    fill: string,
    cls: string,
    r = 3.2
): string {
    const dots = points
        .map(
            ([px, py]) =>
                `<circle class="marker" cx="${px}" cy="${py}" r="${r}" fill="${fill}"/>`
        )
        .join("\n");
    return `<g class="${cls}">\n${dots}\n</g>`;
}

export function document(frame: Frame, body: string): string {
    return (
        `<svg xmlns="http://www.w3.org/2000/svg" ` +
        `width="${frame.width}" height="${frame.height}" ` +
        `viewBox="0 0 ${frame.width} ${frame.height}">\n` +
        `<rect width="${frame.width}" height="${frame.height}" fill="white"/>\n` +
        `${body}\n</svg>\n`
    );
}

import { spawnSync } from "child_process";
import { existsSync, mkdtempSync, readFileSync } from "fs";
import { tmpdir } from "os";
import { join } from "path";
import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";
import { renderFig1 } from "../src/fig1";
import { renderFig2 } from "../src/fig2";
import { runPlot } from "../src/main";

const FIXTURES = join(__dirname, "fixtures");
const DIST = join(__dirname, "..", "dist");

let outDir: string;
let errSpy: ReturnType<typeof vi.spyOn>;
let logSpy: ReturnType<typeof vi.spyOn>;

beforeEach(() => {
    outDir = mkdtempSync(join(tmpdir(), "plotkit-"));
    errSpy = vi.spyOn(console, "error").mockImplementation(() => {});
    logSpy = vi.spyOn(console, "log").mockImplementation(() => {});
});

afterEach(() => {
    errSpy.mockRestore();
    logSpy.mockRestore();
});

function stderrText(): string {
    return errSpy.mock.calls.map((c) => c.join(" ")).join("\n");
}

describe("runPlot", () => {
    it("renders a fig1 CSV to SVG and exits 0", () => {
        const out = join(outDir, "fig1.svg");
        const code = runPlot(
            [join(FIXTURES, "fig1.csv"), out],
            "plot_fig1",
            renderFig1
        );
        expect(code).toBe(0);
        expect(readFileSync(out, "utf8").startsWith("<svg ")).toBe(true);
    });

    it("renders a fig2 CSV to SVG and exits 0", () => {
        const out = join(outDir, "fig2.svg");
        const code = runPlot(
            [join(FIXTURES, "fig2.csv"), out],
            "plot_fig2",
            renderFig2
        );
        expect(code).toBe(0);
        expect(readFileSync(out, "utf8")).toContain('class="eta-path"');
    });

    it("exits 2 on a schema mismatch and names the column", () => {
        const code = runPlot(
            [join(FIXTURES, "fig1_missing_col.csv"), join(outDir, "x.svg")],
            "plot_fig1",
            renderFig1
        );
        expect(code).toBe(2);
        expect(stderrText()).toContain("missing column: whittle_se");
        expect(existsSync(join(outDir, "x.svg"))).toBe(false);
    });

    it("exits 2 when the input file does not exist", () => {
        const code = runPlot(
            [join(FIXTURES, "no_such.csv"), join(outDir, "x.svg")],
            "plot_fig1",
            renderFig1
        );
        expect(code).toBe(2);
        expect(stderrText()).toContain("cannot read");
    });

    it("exits 2 on wrong argument count with a usage line", () => {
        expect(runPlot([], "plot_fig1", renderFig1)).toBe(2);
        expect(runPlot(["only-one"], "plot_fig1", renderFig1)).toBe(2);
        expect(stderrText()).toContain("usage: plot_fig1 <input.csv> <output.svg>");
    });
});

describe("built executables", () => {
    // npm test builds before running, so dist/ is present.
    it("plot_fig1 binary renders the fixture end to end", () => {
        const out = join(outDir, "bin1.svg");
        const res = spawnSync(process.execPath, [
            join(DIST, "plot_fig1.js"),
            join(FIXTURES, "fig1.csv"),
            out,
        ]);
        expect(res.status).toBe(0);
        expect(readFileSync(out, "utf8")).toContain('class="series series-bound"');
    });

    it("plot_fig2 binary renders the fixture end to end", () => {
        const out = join(outDir, "bin2.svg");
        const res = spawnSync(process.execPath, [
            join(DIST, "plot_fig2.js"),
            join(FIXTURES, "fig2.csv"),
            out,
        ]);
        expect(res.status).toBe(0);
        expect(readFileSync(out, "utf8")).toContain('class="eta-label"');
    });

    it("plot_fig2 binary exits 2 on a fig1 file", () => {
        const res = spawnSync(process.execPath, [
            join(DIST, "plot_fig2.js"),
            join(FIXTURES, "fig1.csv"),
            join(outDir, "bad.svg"),
        ]);
        expect(res.status).toBe(2);
        expect(String(res.stderr)).toContain("missing column: eta");
    });
});

// Shared command-line driver for the two renderers: read a CSV, render SVG,
// write it out. Exit code 0 on success, 2 on anything wrong with the
// invocation or the input file (so shell pipelines can distinguish "bad
// input" from a crash).

import { readFileSync, writeFileSync } from "fs";
import { SchemaError } from "./csv";

export function runPlot(
    argv: string[],
    name: string,
    render: (csvText: string) => string
): number {
    if (argv.length !== 2) {
        console.error(`usage: ${name} <input.csv> <output.svg>`);
        return 2;
    }
    const [inputPath, outputPath] = argv;

    let csvText: string;
    try {
        csvText = readFileSync(inputPath, "utf8");
    } catch (err) {
        console.error(`error: cannot read ${inputPath}: ${message(err)}`);
        return 2;
    }

    let svg: string;
    try {
        svg = render(csvText);
    } catch (err) {
        if (err instanceof SchemaError) {
            console.error(`error: ${inputPath}: ${err.message}`);
            return 2;
        }
        throw err;
    }

    try {
        writeFileSync(outputPath, svg);
    } catch (err) {
        console.error(`error: cannot write ${outputPath}: ${message(err)}`);
        return 2;
    }
    console.log(`wrote ${outputPath}`);
    return 0;
}

function message(err: unknown): string {
    return err instanceof Error ? err.message : String(err);
}

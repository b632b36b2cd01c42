// Strict reader for the scheduler CLI's CSV outputs.
//
// The producer writes a fixed header, numeric rows, and may append comment
// lines starting with "#" (it uses one to record a hash of the scenario that
// generated the file). Comments and blank lines are skipped; everything else
// must conform exactly, so a file from the wrong command or a truncated
// download fails loudly instead of rendering a misleading picture.

export class SchemaError extends Error {}

export interface Table {
    header: string[];
    rows: number[][];
}

function parseNumber(field: string, line: number, column: string): number {
    const text = field.trim();
    if (text.toLowerCase() === "nan") {
        return NaN; // the producer writes "nan" for undefined standard errors
    }
    const value = Number(text);
    if (text === "" || Number.isNaN(value)) {
        throw new SchemaError(
            `line ${line}: column ${column} has non-numeric value "${field}"`
        );
    }
    return value;
}

export function parseCsv(text: string, expectedHeader: string[]): Table {
    const lines = text.split(/\r?\n/);
    let header: string[] | null = null;
    const rows: number[][] = [];

    for (let i = 0; i < lines.length; i++) {
        const line = lines[i];
        if (line.trim() === "" || line.startsWith("#")) {
            continue;
        }
        const fields = line.split(",").map((f) => f.trim());
        if (header === null) {
            header = fields;
            checkHeader(header, expectedHeader);
            continue;
        }
        if (fields.length !== header.length) {
            throw new SchemaError(
                `line ${i + 1}: expected ${header.length} fields, got ${fields.length}`
            );
        }
        rows.push(fields.map((f, j) => parseNumber(f, i + 1, header![j])));
    }

    if (header === null) {
        throw new SchemaError("empty file: no header row");
    }
    if (rows.length === 0) {
        throw new SchemaError("no data rows");
    }
    return { header, rows };
}

function checkHeader(actual: string[], expected: string[]): void {
    for (const name of expected) {
        if (!actual.includes(name)) {
            throw new SchemaError(
                `missing column: ${name} (header is "${actual.join(",")}", ` +
                    `expected "${expected.join(",")}")`
            );
        }
    }
    for (const name of actual) {
        if (!expected.includes(name)) {
            throw new SchemaError(
                `unexpected column: ${name} (expected "${expected.join(",")}")`
            );
        }
    }
    // Same set of names but scrambled order would also be a producer change
    // worth refusing, since the schemas are positional contracts.
    for (let i = 0; i < expected.length; i++) {
        if (actual[i] !== expected[i]) {
            throw new SchemaError(
                `column ${i + 1} is ${actual[i]}, expected ${expected[i]}`
            );
        }
    }
}

export function column(table: Table, name: string): number[] {
    const idx = table.header.indexOf(name);
    if (idx < 0) {
        throw new SchemaError(`missing column: ${name}`);
    }
    return table.rows.map((row) => row[idx]);
}

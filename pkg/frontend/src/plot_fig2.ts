#!/usr/bin/env node
import { renderFig2 } from "./fig2";
import { runPlot } from "./main";

process.exit(runPlot(process.argv.slice(2), "plot_fig2", renderFig2));

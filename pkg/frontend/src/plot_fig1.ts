#!/usr/bin/env node
import { renderFig1 } from "./fig1";
import { runPlot } from "./main";

process.exit(runPlot(process.argv.slice(2), "plot_fig1", renderFig1));

export * from "./readers.js";
export * from "./svg.js";
export * from "./plots.js";
export { renderFigure } from "./cli.js";

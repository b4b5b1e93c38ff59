import init, { branchingTable, branchingCurves, modulusCurve } from "./pkg/adapted_ot_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const fmt = (x) => x.toPrecision(6).replace(/\.?0+$/, "");
const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

function showError(el, e) {
  el.innerHTML = "";
  const div = document.createElement("div");
  div.className = "error";
  div.textContent = String(e.message ?? e);
  el.appendChild(div);
}

function plot(canvas, xs, series) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 40;
  ctx.clearRect(0, 0, w, h);
  const xmax = Math.max(...xs, 1e-12);
  const ymax = Math.max(1e-12, ...series.flatMap((s) => s.values));
  const sx = (x) => pad + (x / xmax) * (w - 2 * pad);
  const sy = (y) => h - pad - (y / ymax) * (h - 2 * pad);

  ctx.strokeStyle = "#888";
  ctx.fillStyle = "#444";
  ctx.font = "12px sans-serif";
  ctx.beginPath();
  ctx.moveTo(pad, pad / 2);
  ctx.lineTo(pad, h - pad);
  ctx.lineTo(w - pad / 2, h - pad);
  ctx.stroke();
  ctx.fillText("δ", w - pad / 2 - 10, h - pad + 16);
  ctx.fillText(fmt(xmax), sx(xmax) - 10, h - pad + 16);
  ctx.fillText("ω", 8, pad / 2 + 4);
  ctx.fillText(fmt(ymax), 2, sy(ymax) + 4);

  series.forEach((s, i) => {
    ctx.strokeStyle = COLORS[i % COLORS.length];
    ctx.fillStyle = ctx.strokeStyle;
    ctx.beginPath();
    s.values.forEach((v, j) => (j ? ctx.lineTo(sx(xs[j]), sy(v)) : ctx.moveTo(sx(xs[j]), sy(v))));
    ctx.stroke();
    s.values.forEach((v, j) => ctx.fillRect(sx(xs[j]) - 2, sy(v) - 2, 4, 4));
    ctx.fillText(s.label, w - pad - 70, pad + 14 * i);
  });
}

function runTable() {
  const out = $("t-out");
  try {
    const { rows } = JSON.parse(branchingTable($("t-gaps").value, num("t-sep"), num("t-delta"), num("t-p")));
    const head = "<tr><th>g</th><th>W(paths)</th><th>W(lifts)</th><th>ω(δ) LP</th><th>ω(δ) closed form</th></tr>";
    const body = rows
      .map((r) => `<tr><td>${fmt(r.gap)}</td><td>${fmt(r.plain)}</td><td>${fmt(r.lifted)}</td><td>${fmt(r.omega)}</td><td>${fmt(r.closed_form)}</td></tr>`)
      .join("");
    out.innerHTML = `<table>${head}${body}</table>`;
  } catch (e) {
    showError(out, e);
  }
}

function runCurves() {
  $("c-err").textContent = "";
  try {
    const max = num("c-max");
    const grid = Array.from({ length: 41 }, (_, i) => (max * i) / 40).join(",");
    const { deltas, curves } = JSON.parse(branchingCurves($("c-gaps").value, num("c-sep"), grid, num("c-p")));
    plot($("c-plot"), deltas, curves.map((c) => ({ label: `g = ${fmt(c.gap)}`, values: c.values })));
  } catch (e) {
    $("c-err").textContent = String(e.message ?? e);
  }
}

function runMeasure() {
  const out = $("m-out");
  try {
    const r = JSON.parse(modulusCurve($("m-doc").value, $("m-grid").value, num("m-p"), num("m-t")));
    plot($("m-plot"), r.deltas, [{ label: "ω", values: r.values }]);
    const pairs = r.deltas.map((d, i) => `ω(${fmt(d)}) = ${fmt(r.values[i])}`).join(", ");
    out.textContent = `${pairs}. diam Y = ${fmt(r.y_diameter)}; curve law violations: ${r.violations}.`;
  } catch (e) {
    showError(out, e);
  }
}

await init();
$("t-run").onclick = runTable;
$("c-run").onclick = runCurves;
$("m-run").onclick = runMeasure;
runTable();
runCurves();
runMeasure();

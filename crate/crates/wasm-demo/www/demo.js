import init, { inclusion, gumbelHistogram, simulate } from "./pkg/powervar_wasm.js";

const COLOURS = { uniform: "#1f77b4", topk_variance: "#d62728", powervariance: "#2ca02c" };
const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function frame(canvas, xMin, xMax, yMin, yMax) {
  const ctx = canvas.getContext("2d");
  const pad = 40;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#000";
  ctx.beginPath();
  ctx.moveTo(pad, pad / 2);
  ctx.lineTo(pad, canvas.height - pad);
  ctx.lineTo(canvas.width - pad / 2, canvas.height - pad);
  ctx.stroke();
  const sx = (x) => pad + ((x - xMin) / (xMax - xMin || 1)) * (canvas.width - 1.5 * pad);
  const sy = (y) => canvas.height - pad - ((y - yMin) / (yMax - yMin || 1)) * (canvas.height - 1.5 * pad);
  ctx.fillStyle = "#000";
  ctx.font = "11px sans-serif";
  ctx.fillText(yMax.toPrecision(3), 2, sy(yMax) + 4);
  ctx.fillText(yMin.toPrecision(3), 2, sy(yMin));
  ctx.fillText(String(+xMin.toPrecision(3)), sx(xMin), canvas.height - pad + 14);
  ctx.fillText(String(+xMax.toPrecision(3)), sx(xMax) - 20, canvas.height - pad + 14);
  return { ctx, sx, sy };
}

function line(ctx, pts, colour) {
  ctx.strokeStyle = colour;
  ctx.lineWidth = 2;
  ctx.beginPath();
  pts.forEach(([x, y], i) => (i ? ctx.lineTo(x, y) : ctx.moveTo(x, y)));
  ctx.stroke();
  ctx.lineWidth = 1;
}

function guard(outId, fn) {
  try {
    fn();
  } catch (e) {
    $(outId).textContent = String(e.message ?? e);
    $(outId).className = "err";
  }
}

function runInclusion() {
  guard("inc-out", () => {
    const scores = new Float64Array($("inc-scores").value.split(",").map(Number));
    const r = JSON.parse(inclusion(scores, num("inc-k"), num("inc-beta"), num("inc-trials"), 1));
    const yMax = Math.max(...r.empirical, ...(r.exact ?? [0]), 1e-9);
    const n = r.scores.length;
    const { ctx, sy } = frame($("inc-canvas"), 0, n, 0, yMax);
    const w = ($("inc-canvas").width - 60) / n;
    r.empirical.forEach((p, i) => {
      ctx.fillStyle = "#2ca02c";
      ctx.fillRect(40 + i * w + 4, sy(p), w * 0.45, sy(0) - sy(p));
      if (r.exact) {
        ctx.fillStyle = "#999";
        ctx.fillRect(40 + i * w + 4 + w * 0.45, sy(r.exact[i]), w * 0.45, sy(0) - sy(r.exact[i]));
      }
    });
    let msg = "green: sampled inclusion frequency";
    if (r.exact) {
      const tv = 0.5 * r.empirical.reduce((s, p, i) => s + Math.abs(p - r.exact[i]), 0);
      msg += `; grey: exact sequential-sampling probability; total variation ${tv.toFixed(4)}`;
    }
    $("inc-out").className = "note";
    $("inc-out").textContent = msg;
  });
}

function runGumbel() {
  guard("gum-out", () => {
    const h = JSON.parse(gumbelHistogram(num("gum-beta"), num("gum-draws"), 60, 2));
    const yMax = Math.max(...h.density, ...h.expected);
    const { ctx, sx, sy } = frame($("gum-canvas"), h.edges[0], h.edges[h.edges.length - 1], 0, yMax);
    ctx.fillStyle = "#9ecae1";
    h.density.forEach((d, i) => ctx.fillRect(sx(h.edges[i]), sy(d), sx(h.edges[i + 1]) - sx(h.edges[i]) - 1, sy(0) - sy(d)));
    const centres = h.expected.map((e, i) => [sx((h.edges[i] + h.edges[i + 1]) / 2), sy(e)]);
    line(ctx, centres, "#d62728");
    $("gum-out").className = "note";
    $("gum-out").textContent = `sample mean ${h.mean.toFixed(4)}, expected ${(0.5772156649 / h.beta).toFixed(4)}; red: analytic density`;
  });
}

function runSimulation() {
  $("sim-out").className = "note";
  $("sim-out").textContent = "running...";
  // Let the message paint before the synchronous runs block the page.
  setTimeout(() =>
    guard("sim-out", () => {
      const curves = ["uniform", "topk_variance", "powervariance"].map((s) =>
        JSON.parse(simulate(s, num("sim-beta"), num("sim-seed")))
      );
      const all = curves.flatMap((c) => c.discrete_rmse);
      const xs = curves[0].labeled_size;
      const { ctx, sx, sy } = frame($("sim-canvas"), xs[0], xs[xs.length - 1], Math.min(...all), Math.max(...all));
      const parts = [];
      curves.forEach((c, j) => {
        line(ctx, c.labeled_size.map((x, i) => [sx(x), sy(c.discrete_rmse[i])]), COLOURS[c.strategy]);
        ctx.fillStyle = COLOURS[c.strategy];
        ctx.fillText(c.strategy, 700, 20 + 14 * j);
        const last = c.discrete_rmse[c.discrete_rmse.length - 1];
        parts.push(`${c.strategy}: final RMSE ${last.toFixed(3)}, acquired level-2 share ${c.acquired_levels[2].toFixed(2)}`);
      });
      $("sim-out").textContent = parts.join(" | ");
    })
  );
}

await init();
$("inc-run").onclick = runInclusion;
$("gum-run").onclick = runGumbel;
$("sim-run").onclick = runSimulation;
runInclusion();
runGumbel();

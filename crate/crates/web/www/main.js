import init, { spectral_gap, rate_curves, pme_decay } from "./pkg/nonlocal_ineq_web.js";

const num = (id) => Number(document.getElementById(id).value);
const COLORS = ["#1f77b4", "#d62728", "#2ca02c"];

// Draws each series as a polyline; `logx`/`logy` switch the axes to log10.
function plot(canvas, series, { logx = false, logy = false } = {}) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  const tx = (v) => (logx ? Math.log10(v) : v);
  const ty = (v) => (logy ? Math.log10(v) : v);
  const pts = series.map((s) =>
    s.x.map((x, i) => [tx(x), s.y[i] == null ? NaN : ty(s.y[i])]).filter(([a, b]) => isFinite(a) && isFinite(b)),
  );
  const all = pts.flat();
  if (all.length === 0) return;
  const [x0, x1] = [Math.min(...all.map((p) => p[0])), Math.max(...all.map((p) => p[0]))];
  const [y0, y1] = [Math.min(...all.map((p) => p[1])), Math.max(...all.map((p) => p[1]))];
  const pad = 30;
  const sx = (x) => pad + ((x - x0) / (x1 - x0 || 1)) * (w - 2 * pad);
  const sy = (y) => h - pad - ((y - y0) / (y1 - y0 || 1)) * (h - 2 * pad);
  ctx.font = "11px sans-serif";
  ctx.fillStyle = "#555";
  ctx.fillText(`${logy ? "log10 " : ""}y ∈ [${y0.toPrecision(3)}, ${y1.toPrecision(3)}]`, pad, 14);
  ctx.fillText(`${logx ? "log10 " : ""}x ∈ [${x0.toPrecision(3)}, ${x1.toPrecision(3)}]`, w - 220, h - 8);
  pts.forEach((p, k) => {
    ctx.strokeStyle = COLORS[k % COLORS.length];
    ctx.beginPath();
    p.forEach(([x, y], i) => (i ? ctx.lineTo(sx(x), sy(y)) : ctx.moveTo(sx(x), sy(y))));
    ctx.stroke();
    ctx.fillStyle = ctx.strokeStyle;
    ctx.fillText(series[k].label, w - 200, 14 + 14 * k);
  });
}

function guarded(outId, fn) {
  const out = document.getElementById(outId);
  out.className = "out";
  out.textContent = "working…";
  // let the status paint before the synchronous wasm call
  setTimeout(() => {
    try {
      out.textContent = fn();
    } catch (e) {
      out.className = "out err";
      out.textContent = String(e);
    }
  }, 10);
}

function runGap() {
  guarded("gap-out", () => {
    const v = JSON.parse(spectral_gap(num("eps"), num("alpha"), num("radius"), num("n")));
    plot(document.getElementById("gap-plot"), [{ label: "minimizer f(x)", x: v.x, y: v.eigenvector }]);
    return `gap = ${v.gap.toFixed(5)}   closed-form constant c = ${v.analytic_constant.toFixed(5)}   ` +
      `iterations = ${v.iterations}   tail mass = ${v.tail_mass.toExponential(2)}`;
  });
}

function runRates() {
  guarded("rates-out", () => {
    const v = JSON.parse(rate_curves(num("eps"), num("alpha"), num("rmin"), num("rmax"), 25));
    plot(
      document.getElementById("rates-plot"),
      [
        { label: "weak Poincaré α(r)", x: v.r, y: v.wp_rate },
        { label: "super Poincaré β(r)", x: v.r, y: v.sp_beta },
        { label: "local β_1(r)", x: v.r, y: v.local_sp_beta },
      ],
      { logx: true, logy: true },
    );
    const missing = v.sp_beta.every((b) => b == null) ? "β(r) needs ε > α; not shown" : "";
    return missing;
  });
}

function runPme() {
  guarded("pme-out", () => {
    const v = JSON.parse(pme_decay(num("eps"), num("alpha"), num("radius"), Math.min(num("n"), 600), num("m"), num("tend")));
    plot(
      document.getElementById("pme-plot"),
      [
        { label: "μ(u_t²)", x: v.t, y: v.l2 },
        { label: "bound", x: v.t, y: v.bound },
      ],
      { logy: true },
    );
    const last = v.l2.length - 1;
    return `c = ${v.c.toFixed(5)} (${v.constant_source})   steps = ${last}   ` +
      `final μ(u²) = ${v.l2[last].toExponential(3)}   bound = ${v.bound[last].toExponential(3)}`;
  });
}

await init();
document.getElementById("run-gap").onclick = runGap;
document.getElementById("run-rates").onclick = runRates;
document.getElementById("run-pme").onclick = runPme;

import init, { analyticCurve, PureSolve } from "./pkg/qdisc_demo.js";

const $ = (id) => document.getElementById(id);
const out = $("out");
const series = new Map();
let solved = null;

function show(text, isError = false) {
  out.textContent = text;
  out.className = isError ? "err" : "";
}

function guarded(fn) {
  return () => {
    try {
      fn();
    } catch (e) {
      show(String(e.message ?? e), true);
    }
  };
}

function draw() {
  const canvas = $("plot");
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 48;
  ctx.clearRect(0, 0, w, h);

  const all = [...series.values()].flatMap((s) => s.y.filter(Number.isFinite));
  if (all.length === 0) return;
  const ymax = Math.max(...all) * 1.05;
  const px = (q) => pad + q * (w - 2 * pad);
  const py = (y) => h - pad - (y / ymax) * (h - 2 * pad);

  ctx.strokeStyle = "#444";
  ctx.fillStyle = "#444";
  ctx.font = "12px system-ui";
  ctx.beginPath();
  ctx.moveTo(pad, pad);
  ctx.lineTo(pad, h - pad);
  ctx.lineTo(w - pad, h - pad);
  ctx.stroke();
  for (let i = 0; i <= 4; i++) {
    const q = i / 4;
    ctx.fillText(q.toFixed(2), px(q) - 12, h - pad + 16);
    const y = (ymax * i) / 4;
    ctx.fillText(y.toFixed(1), 6, py(y) + 4);
  }
  ctx.fillText("prior q", w / 2 - 20, h - 8);

  for (const s of series.values()) {
    ctx.strokeStyle = s.color;
    ctx.lineWidth = 2;
    ctx.beginPath();
    let pen = false;
    s.q.forEach((q, i) => {
      const y = s.y[i];
      if (!Number.isFinite(y)) {
        pen = false;
        return;
      }
      pen ? ctx.lineTo(px(q), py(y)) : ctx.moveTo(px(q), py(y));
      pen = true;
    });
    ctx.stroke();
  }
}

const xDeg = () => Number($("x").value);
const eps = () => Number($("eps").value);

$("analytic").onclick = guarded(() => {
  const c = JSON.parse(analyticCurve(xDeg(), eps(), 400));
  series.set("goal", { q: c.q, y: c.n_goal, color: "#1f77b4" });
  series.set("bound", { q: c.q, y: c.lower_bound, color: "#999" });
  draw();
  const mid = c.q.findIndex((q) => q >= 0.5);
  show(`closed form at q = ${c.q[mid].toFixed(3)}: ${c.n_goal[mid].toFixed(4)} copies`);
});

$("solve").onclick = guarded(() => {
  solved?.free();
  solved = null;
  const started = performance.now();
  solved = new PureSolve(xDeg(), eps(), Number($("points").value));
  const c = JSON.parse(solved.curve());
  series.set("numeric", { q: c.q, y: c.value, color: "#d62728" });
  draw();
  $("inspect").disabled = false;
  $("simulate").disabled = false;
  const ms = (performance.now() - started).toFixed(0);
  show(`solved in ${ms} ms, ${c.iterations} sweeps, converged: ${c.converged}`);
});

$("inspect").onclick = guarded(() => {
  show(JSON.stringify(JSON.parse(solved.action(Number($("q").value))), null, 2));
});

$("simulate").onclick = guarded(() => {
  const r = JSON.parse(solved.simulate(Number($("q0").value), Number($("trials").value), Number($("seed").value)));
  const expected = JSON.parse(solved.action(r.q0)).expected_copies;
  show(
    `trials ${r.trials}: mean copies ${r.mean_copies.toFixed(4)} ` +
      `(stderr ${(r.stderr_copies ?? 0).toFixed(4)}), solver value ${expected.toFixed(4)}, ` +
      `errors ${r.errors} (${(100 * r.empirical_error).toFixed(3)}%)`,
  );
});

init().then(() => show("Ready."), (e) => show(`failed to load module: ${e}`, true));

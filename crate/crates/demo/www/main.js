import init, { jrCurve, cemQuadratic, exploreMaze } from "./pkg/advcur_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function call(out, f) {
  try {
    return JSON.parse(f());
  } catch (e) {
    $(out).textContent = `error: ${e}`;
    return null;
  }
}

function plotJr() {
  const k = num("jr-k");
  const pts = call("jr-out", () => jrCurve(k, num("jr-var"), num("jr-max"), 120));
  if (!pts) return;
  const c = $("jr-canvas"), g = c.getContext("2d");
  g.clearRect(0, 0, c.width, c.height);
  const top = Math.log(k), maxX = pts[pts.length - 1].separation;
  const x = (s) => 30 + (s / maxX) * (c.width - 40);
  const y = (v) => c.height - 20 - (v / top) * (c.height - 40);
  g.strokeStyle = "#bbb";
  g.setLineDash([4, 4]);
  g.beginPath(); g.moveTo(x(0), y(top)); g.lineTo(x(maxX), y(top)); g.stroke();
  g.setLineDash([]);
  g.strokeStyle = "#1f5fa8";
  g.beginPath();
  pts.forEach((p, i) => (i ? g.lineTo : g.moveTo).call(g, x(p.separation), y(p.divergence)));
  g.stroke();
  const last = pts[pts.length - 1];
  $("jr-out").textContent = `divergence at ${last.separation.toFixed(1)}: ${last.divergence.toFixed(4)}   ln K = ${top.toFixed(4)}`;
}

function runCem(tx, ty) {
  const r = call("cem-out", () => cemQuadratic(tx, ty, num("cem-it"), num("cem-n"), num("cem-seed")));
  if (!r) return;
  const c = $("cem-canvas"), g = c.getContext("2d");
  const px = (v) => ((v + 1) / 2) * c.width;
  const py = (v) => ((1 - v) / 2) * c.height;
  g.clearRect(0, 0, c.width, c.height);
  g.fillStyle = "#c33";
  g.beginPath(); g.arc(px(tx), py(ty), 5, 0, 2 * Math.PI); g.fill();
  g.strokeStyle = "#1f5fa8";
  g.lineWidth = 2;
  g.beginPath(); g.arc(px(r.best[0]), py(r.best[1]), 7, 0, 2 * Math.PI); g.stroke();
  g.lineWidth = 1;
  $("cem-out").textContent =
    `best (${r.best.map((v) => v.toFixed(3)).join(", ")})  cost ${r.best_cost.toExponential(2)}\n` +
    `best-ever per iteration: ${r.best_trace.map((v) => v.toExponential(1)).join("  ")}`;
}

function explore() {
  $("mz-out").textContent = "running...";
  // let the status text paint before the synchronous run
  setTimeout(() => {
    const r = call("mz-out", () => exploreMaze($("mz-method").value, num("mz-k"), num("mz-rounds"), num("mz-seed")));
    if (!r) return;
    const c = $("mz-canvas"), g = c.getContext("2d");
    const sx = c.width / r.width, sy = c.height / r.height;
    g.clearRect(0, 0, c.width, c.height);
    g.fillStyle = "#555";
    for (const w of r.walls) g.fillRect(w.x0 * sx, c.height - w.y1 * sy, (w.x1 - w.x0) * sx, (w.y1 - w.y0) * sy);
    r.episodes.forEach((ep, i) => {
      g.strokeStyle = `hsl(${(i * 47) % 360}, 65%, 45%)`;
      g.beginPath();
      ep.forEach(([x, y], j) => (j ? g.lineTo : g.moveTo).call(g, x * sx, c.height - y * sy));
      g.stroke();
    });
    $("mz-out").textContent = `coverage by round: ${r.coverage.map((v) => v.toFixed(3)).join(" ")}`;
  }, 10);
}

await init();
$("jr-run").onclick = plotJr;
$("mz-run").onclick = explore;
$("cem-canvas").onclick = (e) => {
  const c = e.target, b = c.getBoundingClientRect();
  runCem(((e.clientX - b.left) / c.width) * 2 - 1, 1 - ((e.clientY - b.top) / c.height) * 2);
};
plotJr();
runCem(0.4, -0.3);

// Build with: wasm-pack build crates/web --target web --out-dir www/pkg
import init, { dSeparated, flowGrid, choiceCurve } from "./pkg/causal_choice_web.js";

const $ = (id) => document.getElementById(id);

function runDsep() {
  const out = $("dsep-out");
  try {
    const sep = dSeparated($("dag").value, $("x").value.trim(), $("y").value.trim(), $("z").value);
    out.className = "result";
    out.textContent = sep ? "d-separated" : "d-connected";
  } catch (e) {
    out.className = "error";
    out.textContent = e.message ?? String(e);
  }
}

function runFlow() {
  const canvas = $("flow-canvas");
  const ctx = canvas.getContext("2d");
  const params = $("flow-params").value.trim().split(/\s+/).filter(Boolean).map(Number);
  $("flow-err").textContent = "";
  let grid;
  try {
    grid = flowGrid(new Float64Array(params), 90, 3.5);
  } catch (e) {
    $("flow-err").textContent = e.message ?? String(e);
    return;
  }
  ctx.fillStyle = "#fff";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  const span = 5, scale = canvas.width / (2 * span);
  let max = -Infinity;
  for (let i = 2; i < grid.length; i += 3) max = Math.max(max, grid[i]);
  for (let i = 0; i < grid.length; i += 3) {
    const shade = Math.exp(grid[i + 2] - max);
    ctx.fillStyle = `rgba(40, 60, 160, ${shade.toFixed(3)})`;
    ctx.fillRect((grid[i] + span) * scale, (span - grid[i + 1]) * scale, 3, 3);
  }
}

function runCurve() {
  const canvas = $("curve-canvas");
  const ctx = canvas.getContext("2d");
  const [lo, hi, n] = [0, 6, 121];
  const c = choiceCurve(+$("asc-bus").value, +$("asc-car").value, +$("beta-cost").value, lo, hi, n);
  ctx.fillStyle = "#fff";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(0, 0, canvas.width, canvas.height);
  const colors = ["#2a7", "#27c", "#c52"];
  for (let a = 0; a < 3; a++) {
    ctx.beginPath();
    ctx.strokeStyle = colors[a];
    for (let i = 0; i < n; i++) {
      const x = ((c[4 * i] - lo) / (hi - lo)) * canvas.width;
      const y = (1 - c[4 * i + 1 + a]) * canvas.height;
      i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y);
    }
    ctx.stroke();
  }
}

await init();
$("dsep-run").addEventListener("click", runDsep);
$("flow-run").addEventListener("click", runFlow);
for (const id of ["asc-bus", "asc-car", "beta-cost"]) $(id).addEventListener("input", runCurve);
runDsep();
runFlow();
runCurve();

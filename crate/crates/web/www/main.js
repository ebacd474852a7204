import init, { kernel_profile, cap_holonomy, Simulation } from "./pkg/llg_lattice_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function report(el, fn) {
  try {
    el.classList.remove("error");
    fn();
  } catch (e) {
    el.classList.add("error");
    el.textContent = String(e.message ?? e);
  }
}

function plotKernel() {
  report($("k-info"), () => {
    const r = num("k-r");
    const v = kernel_profile(num("k-t"), num("k-re"), num("k-im"), r);
    const re = [], im = [];
    for (let i = 0; i < v.length; i += 2) { re.push(v[i]); im.push(v[i + 1]); }
    const c = $("k-canvas"), g = c.getContext("2d");
    g.clearRect(0, 0, c.width, c.height);
    const top = Math.max(...re.map(Math.abs), ...im.map(Math.abs)) || 1;
    const y = (val) => c.height / 2 - (val / top) * (c.height / 2 - 8);
    const x = (i) => 8 + (i * (c.width - 16)) / (re.length - 1);
    g.strokeStyle = "#bbb";
    g.beginPath(); g.moveTo(0, c.height / 2); g.lineTo(c.width, c.height / 2); g.stroke();
    for (const [series, color] of [[re, "#c0392b"], [im, "#2c5aa0"]]) {
      g.strokeStyle = color;
      g.beginPath();
      series.forEach((val, i) => (i ? g.lineTo(x(i), y(val)) : g.moveTo(x(i), y(val))));
      g.stroke();
    }
    const mass = re.reduce((a, b) => a + b, 0);
    $("k-info").textContent =
      `real part red, imaginary part blue; offsets ±${r}; Σ Re = ${mass.toFixed(12)}; peak |k| = ${top.toExponential(4)}`;
  });
}

let sim = null;
let running = false;

function resetSim() {
  running = false;
  $("s-run").textContent = "Run";
  report($("s-info"), () => {
    sim?.free();
    sim = new Simulation(
      $("s-data").value, num("s-n"), num("s-alpha"), $("s-flow").value === "heat", num("s-seed"), num("s-param"),
    );
    drawSim();
  });
}

function drawSim() {
  const n = sim.size();
  const img = new ImageData(new Uint8ClampedArray(sim.pixels()), n, n);
  const off = new OffscreenCanvas(n, n);
  off.getContext("2d").putImageData(img, 0, 0);
  const c = $("s-canvas"), g = c.getContext("2d");
  g.imageSmoothingEnabled = false;
  g.drawImage(off, 0, 0, c.width, c.height);
  $("s-info").textContent =
    `steps ${sim.steps()}  t = ${sim.time().toExponential(4)}  E = ${sim.energy().toFixed(6)}  max e = ${sim.density_max().toExponential(3)}`;
}

function stepSim() {
  if (!sim) return;
  report($("s-info"), () => { sim.step(num("s-count")); drawSim(); });
}

function loop() {
  if (!running) return;
  stepSim();
  if ($("s-info").classList.contains("error")) running = false;
  requestAnimationFrame(loop);
}

function updateHolonomy() {
  report($("h-info"), () => {
    const [measured, exact] = cap_holonomy(num("h-n"), num("h-cos"));
    $("h-info").textContent =
      `cos θ = ${num("h-cos").toFixed(2)}  measured ${measured.toFixed(8)}  exact 2π(1 − cos θ) = ${exact.toFixed(8)}  error ${Math.abs(measured - exact).toExponential(3)}`;
  });
}

await init();
$("k-go").onclick = plotKernel;
for (const id of ["k-t", "k-re", "k-im", "k-r"]) $(id).onchange = plotKernel;
$("s-reset").onclick = resetSim;
$("s-step").onclick = stepSim;
$("s-run").onclick = () => {
  running = !running;
  $("s-run").textContent = running ? "Pause" : "Run";
  loop();
};
$("s-data").onchange = () => {
  $("s-param").value = $("s-data").value === "bubble" ? "0.08" : "0.5";
  resetSim();
};
$("h-cos").oninput = updateHolonomy;
$("h-n").onchange = updateHolonomy;
plotKernel();
resetSim();
updateHolonomy();

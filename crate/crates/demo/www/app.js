import init, { schemeNames, synthesize, spectrum, Classifiers } from "./pkg/amc_demo.js";

const $ = (id) => document.getElementById(id);
let frame = null;
let perturbed = null;
let models = null;

function plot(canvas, series, colors) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  let lo = Infinity, hi = -Infinity;
  for (const s of series) for (const v of s) { lo = Math.min(lo, v); hi = Math.max(hi, v); }
  if (hi === lo) hi = lo + 1;
  series.forEach((s, k) => {
    ctx.strokeStyle = colors[k];
    ctx.beginPath();
    s.forEach((v, i) => {
      const x = (i / (s.length - 1)) * canvas.width;
      const y = canvas.height - ((v - lo) / (hi - lo)) * (canvas.height - 10) - 5;
      i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y);
    });
    ctx.stroke();
  });
}

const channel = (iq, c) => iq.filter((_, i) => i % 2 === c);

function draw() {
  const shown = perturbed ?? frame;
  plot($("iq"), [channel(shown, 0), channel(shown, 1)], ["#1f77b4", "#ff7f0e"]);
  const series = [Array.from(spectrum(frame))];
  if (perturbed) series.push(Array.from(spectrum(perturbed)));
  plot($("spec"), series, ["#2ca02c", "#d62728"]);
}

function scores() {
  if (!models) return;
  const names = schemeNames();
  const clean = models.classify(frame);
  const rows = [["", ...names]];
  const fmt = (p) => Array.from(p).map((v) => v.toFixed(3));
  rows.push(["IQ clean", ...fmt(clean.slice(0, 4))]);
  rows.push(["DFT clean", ...fmt(clean.slice(4))]);
  if (perturbed) {
    const adv = models.classify(perturbed);
    rows.push(["IQ attacked", ...fmt(adv.slice(0, 4))]);
    rows.push(["DFT attacked", ...fmt(adv.slice(4))]);
  }
  $("scores").innerHTML = rows
    .map((r, i) => "<tr>" + r.map((c) => (i === 0 ? `<th>${c}</th>` : `<td>${c}</td>`)).join("") + "</tr>")
    .join("");
}

function generate() {
  frame = synthesize($("scheme").value, Number($("snr").value), Number($("seed").value));
  perturbed = null;
  draw();
  scores();
}

await init();
for (const name of schemeNames()) $("scheme").add(new Option(name, name));
$("gen").onclick = generate;
$("radius").oninput = () => ($("radius-value").textContent = Number($("radius").value).toFixed(3));
$("train").onclick = () => {
  $("status").textContent = "Training...";
  setTimeout(() => {
    models = new Classifiers(200, 10, 7);
    $("status").textContent = "Trained an IQ and a DFT classifier on 800 frames.";
    $("attack").disabled = false;
    scores();
  }, 20);
};
$("attack").onclick = () => {
  const label = schemeNames().indexOf($("scheme").value);
  perturbed = models.attack(frame, label, Number($("radius").value));
  draw();
  scores();
};
generate();

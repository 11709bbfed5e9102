import init, { analyze, image_size, render_synthetic } from "./pkg/spamnet_demo.js";

const $ = (id) => document.getElementById(id);
let current = null; // { rgba, width, height }

function drawThumbnail(rgba, side) {
  const scratch = new OffscreenCanvas(side, side);
  scratch.getContext("2d").putImageData(new ImageData(new Uint8ClampedArray(rgba), side, side), 0, 0);
  const ctx = $("thumb").getContext("2d");
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(scratch, 0, 0, $("thumb").width, $("thumb").height);
}

function drawHistogram(bins, topK) {
  const canvas = $("hist");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const ranked = [...bins].map((v, i) => [v, i]).sort((a, b) => b[0] - a[0]);
  const top = new Set(ranked.slice(0, topK).map(([, i]) => i));
  const w = canvas.width / bins.length;
  const peak = Math.max(...bins, 1e-9);
  bins.forEach((v, i) => {
    // Bin i holds the top two bits of R, G and B.
    const r = ((i >> 4) & 3) * 85, g = ((i >> 2) & 3) * 85, b = (i & 3) * 85;
    const h = (v / peak) * (canvas.height - 4);
    ctx.fillStyle = `rgb(${r},${g},${b})`;
    ctx.fillRect(i * w, canvas.height - h, w - 1, h);
    if (top.has(i)) {
      ctx.strokeStyle = "#f0f";
      ctx.strokeRect(i * w, canvas.height - h, w - 1, h);
    }
  });
}

function drawHog(cells, perSide) {
  const canvas = $("hog");
  const ctx = canvas.getContext("2d");
  ctx.fillStyle = "#000";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  const size = canvas.width / perSide;
  const peak = Math.max(...cells, 1e-9);
  ctx.strokeStyle = "#fff";
  for (let cy = 0; cy < perSide; cy++) {
    for (let cx = 0; cx < perSide; cx++) {
      const base = (cy * perSide + cx) * 9;
      const [mx, my] = [(cx + 0.5) * size, (cy + 0.5) * size];
      for (let k = 0; k < 9; k++) {
        // Edges run perpendicular to the gradient direction of bin k.
        const theta = ((k * 20 + 90) * Math.PI) / 180;
        const len = (cells[base + k] / peak) * size * 0.5;
        ctx.globalAlpha = Math.min(1, 0.25 + cells[base + k] / peak);
        ctx.beginPath();
        ctx.moveTo(mx - Math.cos(theta) * len, my + Math.sin(theta) * len);
        ctx.lineTo(mx + Math.cos(theta) * len, my - Math.sin(theta) * len);
        ctx.stroke();
      }
    }
  }
  ctx.globalAlpha = 1;
}

function refresh() {
  if (!current) return;
  const topK = Number($("topk").value);
  const tau = Number($("tau").value);
  let result;
  try {
    result = analyze(current.rgba, current.width, current.height, topK, tau);
  } catch (err) {
    $("verdict").textContent = String(err);
    return;
  }
  const side = image_size();
  drawThumbnail(result.thumbnail(), side);
  drawHistogram(result.bins(), topK);
  drawHog(result.hog_cells(), result.cells_per_side());
  $("score").textContent = result.score().toFixed(4);
  const spam = result.is_spam();
  $("verdict").textContent = spam ? "spam" : "ham";
  $("verdict").className = spam ? "spam" : "ham";
  result.free();
}

function generate() {
  const side = image_size();
  const rgba = render_synthetic($("klass").value === "spam", Number($("seed").value), Number($("index").value));
  current = { rgba, width: side, height: side };
  refresh();
}

async function upload(file) {
  const bitmap = await createImageBitmap(file);
  const scratch = new OffscreenCanvas(bitmap.width, bitmap.height);
  const ctx = scratch.getContext("2d");
  ctx.drawImage(bitmap, 0, 0);
  const data = ctx.getImageData(0, 0, bitmap.width, bitmap.height);
  current = { rgba: new Uint8Array(data.data.buffer), width: bitmap.width, height: bitmap.height };
  refresh();
}

await init();
$("generate").addEventListener("click", generate);
$("file").addEventListener("change", (e) => e.target.files[0] && upload(e.target.files[0]));
$("topk").addEventListener("input", refresh);
$("tau").addEventListener("input", refresh);
generate();

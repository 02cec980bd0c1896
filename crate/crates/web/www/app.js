import init, { explore_trajectory, render_sample } from "./pkg/motion_prep_web.js";

const $ = (id) => document.getElementById(id);
const SIZE = 112;

function showError(e) {
  $("error").textContent = e ? String(e.message ?? e) : "";
}

function drawTrajectory() {
  const frames = Number($("t-frames").value);
  const kappa = Number($("t-kappa").value);
  $("t-kappa-out").textContent = kappa;
  let view;
  try {
    view = explore_trajectory(BigInt($("t-seed").value), frames, SIZE, Number($("t-ppf").value), kappa);
    showError(null);
  } catch (e) {
    showError(e);
    return;
  }
  const canvas = $("t-canvas");
  const ctx = canvas.getContext("2d");
  const k = canvas.width / SIZE;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#eee";
  ctx.strokeRect(0, 0, canvas.width, canvas.height);

  // points are (row, col); canvas wants (col, row)
  const raw = view.raw();
  ctx.fillStyle = "#bbb";
  for (let i = 0; i < raw.length; i += 2) {
    ctx.fillRect(raw[i + 1] * k - 1.5, raw[i] * k - 1.5, 3, 3);
  }
  const smooth = view.smooth();
  ctx.strokeStyle = "#1f77b4";
  ctx.lineWidth = 2;
  ctx.beginPath();
  for (let i = 0; i < smooth.length; i += 2) {
    const [x, y] = [smooth[i + 1] * k, smooth[i] * k];
    i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y);
  }
  ctx.stroke();
  const centers = view.centers();
  ctx.fillStyle = "#d62728";
  for (let i = 0; i < centers.length; i += 2) {
    ctx.beginPath();
    ctx.arc(centers[i + 1] * k, centers[i] * k, 4, 0, 2 * Math.PI);
    ctx.fill();
  }
  view.free();
}

let sample = null;
let frame = 0;
let playing = true;

function buildSample() {
  try {
    const next = render_sample(
      BigInt($("s-seed").value),
      Number($("s-objects").value),
      Number($("s-ratio").value),
      $("s-bg").value,
      $("s-traj").checked,
      SIZE,
    );
    if (sample) sample.free();
    sample = next;
    showError(null);
  } catch (e) {
    showError(e);
    return;
  }
  const n = sample.token_count();
  const rows = [
    ["tokens", n],
    ["masked", `${sample.masked_count()} (${((100 * sample.masked_count()) / n).toFixed(1)}%)`],
    ["object tokens", sample.object_token_count()],
    ["trajectory-masked", sample.trajectory_count()],
    ["tube-masked", sample.tube_count()],
  ];
  $("s-stats").innerHTML = rows.map(([k, v]) => `<tr><td>${k}</td><td>${v}</td></tr>`).join("");
  drawFrame();
}

function drawFrame() {
  if (!sample) return;
  const w = sample.width();
  const h = sample.height();
  const rgba = sample.frame_rgba(frame, $("s-overlay").checked);
  const image = new ImageData(new Uint8ClampedArray(rgba.buffer, rgba.byteOffset, rgba.length), w, h);
  $("s-canvas").getContext("2d").putImageData(image, 0, 0);
  $("s-frame").textContent = frame;
}

function tick() {
  if (playing && sample) {
    frame = (frame + 1) % sample.frames();
    drawFrame();
  }
  setTimeout(tick, 180);
}

await init();
for (const id of ["t-seed", "t-frames", "t-ppf", "t-kappa"]) $(id).addEventListener("input", drawTrajectory);
for (const id of ["s-seed", "s-objects", "s-ratio", "s-bg", "s-traj"]) $(id).addEventListener("change", buildSample);
$("s-overlay").addEventListener("change", drawFrame);
$("s-play").addEventListener("click", () => {
  playing = !playing;
  $("s-play").textContent = playing ? "pause" : "play";
});
drawTrajectory();
buildSample();
tick();

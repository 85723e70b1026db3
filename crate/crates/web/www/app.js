import init, * as wasm from "./pkg/purify_web.js";

const $ = (id) => document.getElementById(id);
const fmt = (x) => x.toFixed(4);

function showError(e) {
  $("error").textContent = e ? String(e.message ?? e) : "";
}

function runPrompt() {
  try {
    const json = wasm.analyze_prompt(
      $("text").value,
      $("toxic").value,
      $("clean").value,
      $("lexicon").value,
      Number($("seed").value) >>> 0,
      Number($("threshold").value),
      $("safeOnTie").checked,
      $("averaged").checked,
      $("preserveNorm").checked,
    );
    const a = JSON.parse(json);
    $("verdict").textContent = `${a.verdict} (risky fraction ${fmt(a.risky_fraction)}, ranks ${a.toxic_rank}/${a.clean_rank})`;
    const rows = a.tokens.map((t) => {
      const change = t.substituted
        ? Math.hypot(...t.output.map((v, i) => v - t.embedding[i]))
        : 0;
      return `<tr class="${t.label}"><td>${t.token}</td><td>${fmt(t.d_toxic)}</td>` +
        `<td>${fmt(t.d_clean)}</td><td>${t.label}</td><td>${t.substituted ? "yes" : ""}</td>` +
        `<td>${t.substituted ? fmt(change) : ""}</td></tr>`;
    });
    $("tokens").innerHTML =
      "<tr><th>token</th><th>d_toxic</th><th>d_clean</th><th>label</th><th>substituted</th><th>|p* - p|</th></tr>" +
      rows.join("");
    showError(null);
  } catch (e) {
    showError(e);
  }
}

const plane = { point: [0.6, 0.5] };
const RES = 140;

function angles() {
  return [Number($("toxicAngle").value) * Math.PI / 180, Number($("cleanAngle").value) * Math.PI / 180];
}

function drawPlane() {
  const c = $("plane");
  const ctx = c.getContext("2d");
  const w = c.width;
  // view covers [-2, 2]^2 so that doubled points stay visible
  const span = 2;
  const toPx = ([x, y]) => [(x / span + 1) * w / 2, (1 - y / span) * w / 2];
  const [ta, ca] = angles();
  try {
    const map = wasm.risk_map(ta, ca, RES);
    const img = ctx.createImageData(RES, RES);
    for (let i = 0; i < map.length; i++) {
      const v = Math.tanh(map[i] * 3);
      const risky = map[i] <= 0;
      img.data[4 * i] = risky ? 255 : 235 - 40 * v;
      img.data[4 * i + 1] = risky ? 235 + 20 * v : 245;
      img.data[4 * i + 2] = risky ? 235 + 20 * v : 255;
      img.data[4 * i + 3] = 255;
    }
    const off = new OffscreenCanvas(RES, RES);
    off.getContext("2d").putImageData(img, 0, 0);
    ctx.imageSmoothingEnabled = true;
    // the map covers [-1, 1]^2, the central half of the view
    ctx.fillStyle = "#fff";
    ctx.fillRect(0, 0, w, w);
    ctx.drawImage(off, w / 4, w / 4, w / 2, w / 2);

    const line = (a, color) => {
      ctx.strokeStyle = color;
      ctx.lineWidth = 2;
      ctx.beginPath();
      ctx.moveTo(...toPx([-3 * Math.cos(a), -3 * Math.sin(a)]));
      ctx.lineTo(...toPx([3 * Math.cos(a), 3 * Math.sin(a)]));
      ctx.stroke();
    };
    line(ta, "#c00");
    line(ca, "#080");

    const p = plane.point;
    const g = wasm.purify_point(p[0], p[1], ta, ca, $("planeAveraged").checked, $("planePreserve").checked);
    const arrow = (to, color) => {
      ctx.strokeStyle = color;
      ctx.lineWidth = 2;
      ctx.beginPath();
      ctx.moveTo(...toPx([0, 0]));
      ctx.lineTo(...toPx(to));
      ctx.stroke();
      ctx.fillStyle = color;
      ctx.beginPath();
      ctx.arc(...toPx(to), 4, 0, 2 * Math.PI);
      ctx.fill();
    };
    arrow(p, "#000");
    arrow([g[0], g[1]], "#e80");
    ctx.fillStyle = "#080";
    ctx.beginPath();
    ctx.arc(...toPx([g[2], g[3]]), 4, 0, 2 * Math.PI);
    ctx.fill();
    arrow([g[4], g[5]], "#06c");
    $("pointInfo").textContent =
      `p        = (${fmt(p[0])}, ${fmt(p[1])})\n` +
      `(I-V) p  = (${fmt(g[0])}, ${fmt(g[1])})\n` +
      `P_R p    = (${fmt(g[2])}, ${fmt(g[3])})\n` +
      `p*       = (${fmt(g[4])}, ${fmt(g[5])})\n` +
      `d_toxic  = ${fmt(g[6])}\nd_clean  = ${fmt(g[7])}\n` +
      `label    = ${g[8] ? "risky" : "safe"}`;
    showError(null);
  } catch (e) {
    showError(e);
  }
}

function onPlaneClick(ev) {
  const c = $("plane");
  const r = c.getBoundingClientRect();
  const x = ((ev.clientX - r.left) / r.width * 2 - 1) * 2;
  const y = (1 - (ev.clientY - r.top) / r.height * 2) * 2;
  plane.point = [x, y];
  drawPlane();
}

await init();
$("toxic").value = wasm.default_toxic_concepts();
$("clean").value = wasm.default_clean_concepts();
$("lexicon").value = wasm.default_lexicon();
$("run").addEventListener("click", runPrompt);
$("text").addEventListener("keydown", (e) => { if (e.key === "Enter") runPrompt(); });
for (const id of ["toxicAngle", "cleanAngle", "planeAveraged", "planePreserve"]) {
  $(id).addEventListener("input", drawPlane);
}
$("plane").addEventListener("click", onPlaneClick);
runPrompt();
drawPlane();

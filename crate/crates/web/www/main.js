import init, { fit_topics, train_causal, rank_truncate } from "./pkg/eccot_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

function lines(canvas, series, yLabel) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 36;
  ctx.clearRect(0, 0, w, h);
  const all = series.flatMap((s) => s.values);
  let lo = Math.min(...all), hi = Math.max(...all);
  if (hi === lo) { hi += 1; lo -= 1; }
  const n = Math.max(...series.map((s) => s.values.length));
  const x = (i) => pad + (i / Math.max(1, n - 1)) * (w - 2 * pad);
  const y = (v) => h - pad + ((v - lo) / (hi - lo)) * (2 * pad - h);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad / 2, w - 2 * pad, h - 1.5 * pad);
  ctx.fillStyle = "#444";
  ctx.font = "11px system-ui";
  ctx.fillText(hi.toPrecision(4), 2, pad / 2 + 10);
  ctx.fillText(lo.toPrecision(4), 2, h - pad);
  ctx.fillText(yLabel, pad + 4, h - 8);
  series.forEach((s, k) => {
    ctx.strokeStyle = s.color;
    ctx.beginPath();
    s.values.forEach((v, i) => (i ? ctx.lineTo(x(i), y(v)) : ctx.moveTo(x(i), y(v))));
    ctx.stroke();
    ctx.fillStyle = s.color;
    ctx.fillText(s.name, w - pad - 170, pad / 2 + 14 + 13 * k);
  });
}

function runTopics() {
  $("t-status").textContent = "fitting…";
  setTimeout(() => {
    try {
      const r = JSON.parse(fit_topics(num("t-seed"), num("t-k"), num("t-lambda"), num("t-epochs")));
      const rows = r.topics.map((t, k) => {
        const words = t.words.map(([w, p]) => `${w} <small>${p.toFixed(3)}</small>`).join(", ");
        return `<tr><td>topic ${k}</td><td>${words}</td><td class="t${t.matched_truth}">${t.overlap}/5 from theme ${t.matched_truth}</td></tr>`;
      });
      $("t-table").innerHTML = "<tr><th></th><th>top words</th><th>ground truth</th></tr>" + rows.join("");
      lines($("t-loss"), [{ name: "total loss", color: COLORS[0], values: r.loss.map((e) => e.total) }], "epoch");
      $("t-status").textContent = `${r.pairs} related word pairs mined`;
    } catch (e) {
      $("t-status").textContent = `error: ${e}`;
    }
  });
}

function runCausal() {
  $("c-status").textContent = "training…";
  setTimeout(() => {
    try {
      const { curve } = JSON.parse(train_causal(num("c-seed"), num("c-margin"), num("c-epochs")));
      lines(
        $("c-curve"),
        [
          { name: "mean loss", color: COLORS[0], values: curve.map((p) => p.mean_loss) },
          { name: "valid: mean cos(q, r)", color: COLORS[2], values: curve.map((p) => p.pos_mean_cos_qr) },
          { name: "swapped: mean cos(q, r)", color: COLORS[1], values: curve.map((p) => p.neg_mean_cos_qr) },
        ],
        "epoch",
      );
      const first = curve[0], last = curve[curve.length - 1];
      $("c-status").textContent =
        `min-link gap ${first.min_link_gap.toFixed(3)} → ${last.min_link_gap.toFixed(3)}`;
    } catch (e) {
      $("c-status").textContent = `error: ${e}`;
    }
  });
}

function runRank() {
  const tau = num("r-tau");
  $("r-tau-val").textContent = tau.toFixed(2);
  try {
    const r = JSON.parse(rank_truncate(num("r-seed"), num("r-epochs"), tau));
    const canvas = $("r-strip");
    const ctx = canvas.getContext("2d");
    const { width: w, height: h } = canvas;
    ctx.clearRect(0, 0, w, h);
    const x = (c) => 20 + ((c + 1) / 2) * (w - 40);
    r.points.forEach((p, i) => {
      ctx.fillStyle = p.positive ? COLORS[2] : COLORS[1];
      ctx.globalAlpha = p.kept ? 1 : 0.3;
      ctx.fillRect(x(p.coefficient) - 2, p.positive ? 40 + (i % 7) * 6 : 100 + (i % 7) * 6, 4, 4);
    });
    ctx.globalAlpha = 1;
    if (r.dropped > 0) {
      const cut = r.points[r.dropped - 1].coefficient;
      ctx.strokeStyle = "#333";
      ctx.beginPath();
      ctx.moveTo(x(cut) + 3, 20);
      ctx.lineTo(x(cut) + 3, h - 20);
      ctx.stroke();
    }
    ctx.fillStyle = "#444";
    ctx.font = "11px system-ui";
    ctx.fillText("valid chains", 20, 34);
    ctx.fillText("swapped rationale", 20, 94);
    ctx.fillText("-1", 14, h - 6);
    ctx.fillText("coefficient = min(cos(q, r), cos(r, a))", w / 2 - 100, h - 6);
    ctx.fillText("1", w - 24, h - 6);
    $("r-status").textContent =
      `kept ${r.kept}, dropped ${r.dropped}, swapped chains kept ${r.kept_negatives}`;
  } catch (e) {
    $("r-status").textContent = `error: ${e}`;
  }
}

await init();
$("t-run").onclick = runTopics;
$("c-run").onclick = runCausal;
$("r-tau").oninput = runRank;
$("r-seed").onchange = runRank;
$("r-epochs").onchange = runRank;
runTopics();
runCausal();
runRank();

import init, { Playground, train_bot, run_mission } from "./pkg/cognite_web.js";

const COLORS = { 1: "#c0392b", 2: "#8e44ad", 3: "#f1c40f", 4: "#16a085" };
const $ = (id) => document.getElementById(id);

// y grows northwards in the world; the canvas grows downwards.
function cellDrawer(canvas, w, h) {
  const ctx = canvas.getContext("2d");
  const size = Math.floor(Math.min(canvas.width / w, canvas.height / h));
  return {
    ctx,
    size,
    clear() {
      ctx.fillStyle = "#fff";
      ctx.fillRect(0, 0, canvas.width, canvas.height);
      ctx.strokeStyle = "#eee";
      for (let x = 0; x <= w; x++) { ctx.beginPath(); ctx.moveTo(x * size, 0); ctx.lineTo(x * size, h * size); ctx.stroke(); }
      for (let y = 0; y <= h; y++) { ctx.beginPath(); ctx.moveTo(0, y * size); ctx.lineTo(w * size, y * size); ctx.stroke(); }
    },
    cell(x, y, color, inset = 1) {
      ctx.fillStyle = color;
      ctx.fillRect(x * size + inset, (h - 1 - y) * size + inset, size - 2 * inset, size - 2 * inset);
    },
    center(x, y) { return [x * size + size / 2, (h - 1 - y) * size + size / 2]; },
  };
}

function rulesTable(table, rules) {
  table.innerHTML = "<tr><th>shape</th><th>dist</th><th>align</th><th>att</th><th>action</th><th>outcome</th><th>conf</th><th>n</th></tr>";
  for (const r of rules) {
    const c = r.context;
    const row = document.createElement("tr");
    for (const v of [c.shape_id ?? "-", c.distance, c.alignment, c.attached ? "yes" : "", r.action, r.outcome,
                     (r.hits / r.support).toFixed(2), r.support]) {
      const td = document.createElement("td");
      td.textContent = v;
      row.appendChild(td);
    }
    table.appendChild(row);
  }
}

// --- 1. play -------------------------------------------------------------
let game = null;

function drawPlay(view) {
  const d = cellDrawer($("play-canvas"), view.side, view.side);
  d.clear();
  d.cell(view.target.x, view.target.y, "#27ae60");
  for (const o of view.objects) d.cell(o.x, o.y, COLORS[o.shape_id] ?? "#999");
  d.cell(view.agent.x, view.agent.y, view.attached ? "#e67e22" : "#2c3e50", 4);
  $("play-status").textContent =
    `episode ${view.episode}, tick ${view.tick}, power ${view.power}${view.attached ? ", attached" : ""}`;
}

function act(action) {
  if (!game) return;
  const view = JSON.parse(game.act(JSON.stringify(action)));
  const line = view.events.map((e) => e.type).join(", ") + (view.episode_over ? "  (episode over)" : "");
  $("play-events").textContent = line + "\n" + $("play-events").textContent;
  drawPlay(view);
  rulesTable($("play-rules"), JSON.parse(game.rules()));
}

$("play-open").onclick = () => {
  game = new Playground(Number($("play-shape").value), BigInt($("play-seed").value));
  $("play-events").textContent = "";
  drawPlay(JSON.parse(game.view()));
  rulesTable($("play-rules"), []);
};
for (const b of document.querySelectorAll("[data-move]")) b.onclick = () => act({ move: b.dataset.move });
for (const b of document.querySelectorAll("[data-act]")) b.onclick = () => act(b.dataset.act);

// --- 2. train ------------------------------------------------------------
$("train-run").onclick = () => {
  const out = JSON.parse(train_bot(Number($("train-shape").value), BigInt($("train-seed").value),
                                   Number($("train-episodes").value)));
  const canvas = $("train-canvas");
  const ctx = canvas.getContext("2d");
  ctx.fillStyle = "#fff";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#ccc";
  ctx.strokeRect(30, 10, canvas.width - 40, canvas.height - 40);
  ctx.fillStyle = "#222";
  ctx.fillText("success", 2, 12);
  ctx.fillText("episode", canvas.width - 50, canvas.height - 8);
  ctx.strokeStyle = "#2980b9";
  ctx.beginPath();
  out.curve.forEach(([i, rate], k) => {
    const x = 30 + (canvas.width - 40) * (i + 1) / out.episodes;
    const y = 10 + (canvas.height - 40) * (1 - rate);
    k === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y);
  });
  ctx.stroke();
  rulesTable($("train-rules"), out.rules);
};

// --- 3. mission ----------------------------------------------------------
$("mission-run").onclick = () => {
  $("mission-status").textContent = "flying…";
  setTimeout(() => {
    const m = JSON.parse(run_mission(BigInt($("mission-seed").value), $("mission-rules").value, 200));
    const d = cellDrawer($("mission-canvas"), m.width, m.height);
    d.clear();
    d.cell(m.target.x, m.target.y, "#27ae60");
    for (const o of m.objects) d.cell(o.x, o.y, o.gone ? "#ddd" : COLORS[o.shape_id], 2);
    d.ctx.strokeStyle = "#2c3e50";
    d.ctx.lineWidth = 2;
    d.ctx.beginPath();
    m.trajectory.forEach((p, k) => {
      const [x, y] = d.center(p.x, p.y);
      k === 0 ? d.ctx.moveTo(x, y) : d.ctx.lineTo(x, y);
    });
    d.ctx.stroke();
    $("mission-status").textContent = `${m.outcome} after ${m.ticks} ticks (${m.rules} rules)`;
  }, 10);
};

await init();
$("play-open").click();

import init, { TypingDemo, aggregation_trace, blob_similarity, command_word } from "./pkg/neurotype_web.js";

await init();

const demo = new TypingDemo();
const $ = (id) => document.getElementById(id);
const KEYS = { ArrowLeft: 0, ArrowUp: 1, ArrowRight: 2, Backspace: 3, Enter: 4 };

function render(line) {
  const ev = JSON.parse(line);
  $("level").textContent = ev.level;
  $("last").textContent = ev.last_command ?? "-";
  $("counts").textContent = ev.decision_counts.join(" / ");
  ev.blocks.forEach((text, i) => {
    const b = $("b" + i);
    b.textContent = text.replace(/ /g, "␣");
    b.classList.toggle("hl", ev.highlight === i);
  });
  $("display").textContent = ev.typed;
}

function log(msg) {
  $("log").textContent = msg;
}

render(demo.state());

// one window per 0.5 s while a key is held
let held = null;
let timer = null;
function tick() {
  if (held === null) return;
  try {
    const line = demo.push_intent(held);
    render(line);
    if (JSON.parse(line).kind === "command") log("command sent");
  } catch (e) {
    log(String(e));
  }
}
document.addEventListener("keydown", (e) => {
  if (!(e.key in KEYS) || e.target.tagName === "INPUT") return;
  e.preventDefault();
  if (held === KEYS[e.key]) return;
  held = KEYS[e.key];
  clearInterval(timer);
  tick();
  timer = setInterval(tick, 500);
});
document.addEventListener("keyup", (e) => {
  if (KEYS[e.key] === held) {
    held = null;
    clearInterval(timer);
  }
});

document.querySelectorAll("button[data-cmd]").forEach((b) =>
  b.addEventListener("click", () => {
    try {
      render(demo.send_command(b.dataset.cmd));
    } catch (e) {
      log(String(e));
    }
  })
);
$("reset").addEventListener("click", () => {
  demo.reset();
  render(demo.state());
  log("");
});
$("spell").addEventListener("click", () => {
  try {
    log(JSON.parse(command_word($("word").value)).map((w) => w.join(" ")).join("  |  "));
  } catch (e) {
    log(String(e));
  }
});

$("trace").addEventListener("click", () => {
  const decisions = $("trace-in").value.split(",").map((s) => Number(s.trim())).filter((n) => Number.isInteger(n) && n >= 0 && n < 5);
  const out = JSON.parse(aggregation_trace(new Uint8Array(decisions)));
  $("trace-out").textContent = decisions.map((d, i) => (out[i] === null ? `${d}` : `${d}⇒send`)).join("  ");
});

function color(v) {
  const t = Math.max(0, Math.min(1, (v + 1) / 2));
  return `rgb(${Math.round(255 * t)}, ${Math.round(120 + 60 * (1 - t))}, ${Math.round(255 * (1 - t))})`;
}
$("heat").addEventListener("click", () => {
  let res;
  try {
    res = JSON.parse(blob_similarity(Number($("h-ch").value), Number($("h-sep").value), Number($("h-n").value), BigInt($("h-seed").value)));
  } catch (e) {
    $("heat-out").innerHTML = `<tr><td>${e}</td></tr>`;
    return;
  }
  const head = "<tr><td></td>" + res.intents.map((i) => `<td>${i}</td>`).join("") + "<td>self</td><td>cross</td><td>PD %</td></tr>";
  const rows = res.rho
    .map(
      (row, i) =>
        `<tr><td>${res.intents[i]}</td>` +
        row.map((v) => `<td style="background:${color(v)}">${v.toFixed(3)}</td>`).join("") +
        `<td>${res.self[i].toFixed(3)}</td><td>${res.cross[i].toFixed(3)}</td><td>${res.pd[i] === null ? "-" : res.pd[i].toFixed(1)}</td></tr>`
    )
    .join("");
  $("heat-out").innerHTML = head + rows;
});

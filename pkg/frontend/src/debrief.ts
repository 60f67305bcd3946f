// Debrief screen: score totals plus delay / evacuation-time charts drawn from
// the server's exported summary.  The client renders, it never recomputes.

interface DelayRow {
  node: string;
  precedence: string;
  n: number;
  mean: number | null;
  ci_lo: number | null;
  ci_hi: number | null;
  censored: number;
}

interface EvacRow {
  precedence: string;
  island: string | null;
  n: number;
  mean: number | null;
  ci_lo: number | null;
  ci_hi: number | null;
  standard_min: number;
  compliant_fraction: number | null;
}

export function renderDebrief(root: HTMLElement, summary: Record<string, unknown>): void {
  root.innerHTML = "";
  const delays = (summary.delays as DelayRow[]) ?? [];
  const evac = (summary.evac_times as EvacRow[]) ?? [];
  if (!delays.length && !evac.length && !summary.spawned) {
    root.innerHTML = "<h2>debrief</h2><p><em>nothing happened in this run</em></p>";
    return;
  }

  const header = document.createElement("div");
  header.className = "score-screen";
  header.innerHTML = `<h2>final score: ${Number(summary.score).toFixed(1)}</h2>
    <div class="totals">
      <div><b>${summary.saves}</b> total saves (arrived at the highest role of care)</div>
      <div><b>${summary.deaths}</b> deaths</div>
      <div><b>${summary.alive}</b> still transiting the evacuation network</div>
      <div><b>${summary.spawned}</b> casualties generated</div>
    </div>`;
  root.appendChild(header);

  root.appendChild(barChart(
    "average wait for pickup by node and precedence (min)",
    delays.filter((d) => d.mean !== null).map((d) => ({
      label: `${d.node} ${d.precedence}`,
      value: d.mean as number,
      lo: d.ci_lo,
      hi: d.ci_hi,
      cls: d.precedence,
    })),
  ));

  root.appendChild(barChart(
    "time to surgical care by precedence (min, dashed line = standard)",
    evac.filter((e) => e.mean !== null).map((e) => ({
      label: `${e.precedence}${e.island ? " (" + e.island + ")" : ""}`,
      value: e.mean as number,
      lo: e.ci_lo,
      hi: e.ci_hi,
      cls: e.precedence,
      marker: e.standard_min,
    })),
  ));
}

interface Bar {
  label: string;
  value: number;
  lo?: number | null;
  hi?: number | null;
  cls?: string;
  marker?: number;
}

function barChart(title: string, bars: Bar[], width = 720, barH = 22): HTMLElement {
  const wrap = document.createElement("div");
  wrap.className = "chart";
  const h = document.createElement("h3");
  h.textContent = title;
  wrap.appendChild(h);
  if (!bars.length) {
    wrap.appendChild(document.createTextNode("no data"));
    return wrap;
  }
  const canvas = document.createElement("canvas");
  canvas.width = width;
  canvas.height = bars.length * (barH + 8) + 20;
  wrap.appendChild(canvas);
  const ctx = canvas.getContext("2d");
  if (!ctx) return wrap;
  const maxV = Math.max(...bars.map((b) => Math.max(b.value, b.hi ?? 0, b.marker ?? 0))) * 1.1;
  const x0 = 170;
  const px = (v: number) => x0 + (v / maxV) * (width - x0 - 20);
  bars.forEach((b, i) => {
    const y = 10 + i * (barH + 8);
    ctx.fillStyle = "#333";
    ctx.font = "11px sans-serif";
    ctx.textAlign = "right";
    ctx.fillText(b.label, x0 - 6, y + barH / 2 + 4);
    ctx.fillStyle = b.cls === "urgent" ? "#c0392b" : "#e67e22";
    ctx.fillRect(x0, y, px(b.value) - x0, barH);
    if (b.lo != null && b.hi != null) {
      ctx.strokeStyle = "#222";
      ctx.beginPath();
      ctx.moveTo(px(b.lo), y + barH / 2);
      ctx.lineTo(px(b.hi), y + barH / 2);
      ctx.stroke();
    }
    if (b.marker !== undefined) {
      ctx.strokeStyle = "#555";
      ctx.setLineDash([4, 4]);
      ctx.beginPath();
      ctx.moveTo(px(b.marker), y - 2);
      ctx.lineTo(px(b.marker), y + barH + 2);
      ctx.stroke();
      ctx.setLineDash([]);
    }
    ctx.fillStyle = "#000";
    ctx.textAlign = "left";
    ctx.fillText(b.value.toFixed(1), px(b.value) + 4, y + barH / 2 + 4);
  });
  return wrap;
}

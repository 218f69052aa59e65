/** Browser entry point: wire the console to the page. */

import { OperatorConsole, configFromQuery } from "./console.js";
import { PlanView } from "./view.js";

const cfg = configFromQuery(window.location.search);
const canvas = document.getElementById("plan") as HTMLCanvasElement;
const zSlider = document.getElementById("height") as HTMLInputElement;
const statusLine = document.getElementById("conn") as HTMLElement;

const console_ = new OperatorConsole({
  url: cfg.url,
  prefix: cfg.prefix,
  onStateChange: (s) => view.setConnectionState(s),
});
const view = new PlanView(canvas, zSlider, statusLine, console_);

for (const id of ["tone", "chirp"]) {
  const play = document.getElementById(`play-${id}`);
  const stop = document.getElementById(`stop-${id}`);
  play?.addEventListener("click", () => console_.command(id, "play"));
  stop?.addEventListener("click", () => console_.command(id, "stop"));
}

console_.start();
view.setConnectionState(console_.client.state);

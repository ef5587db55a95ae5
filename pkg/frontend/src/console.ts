/** Browser wiring: canvas, inputs, and the explanation panel.

All figures shown come from the latest server responses held by the
controller; this file only formats them.
*/

import { ApiClient } from './api.js';
import { attributionRows, ConsoleController, ConsoleSnapshot } from './state.js';
import type { RasterFrame } from './ppm.js';

const SCALE = 8;

function drawFrame(canvas: HTMLCanvasElement, frame: RasterFrame, snapshot: ConsoleSnapshot): void {
  canvas.width = frame.width * SCALE;
  canvas.height = frame.height * SCALE;
  const ctx = canvas.getContext('2d')!;
  const base = document.createElement('canvas');
  base.width = frame.width;
  base.height = frame.height;
  base.getContext('2d')!.putImageData(
    new ImageData(new Uint8ClampedArray(frame.rgba), frame.width, frame.height), 0, 0,
  );
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(base, 0, 0, canvas.width, canvas.height);
  for (const [marker, color] of [
    [snapshot.pending.start, '#00ff00'],
    [snapshot.pending.goal, '#ff2020'],
  ] as const) {
    if (!marker) continue;
    ctx.strokeStyle = color;
    ctx.lineWidth = 2;
    ctx.strokeRect(marker[1] * SCALE, marker[0] * SCALE, SCALE, SCALE);
  }
}

function renderPanel(panel: HTMLElement, snapshot: ConsoleSnapshot): void {
  const route = snapshot.lastRoute;
  if (snapshot.error) {
    panel.innerHTML = `<p class="error">${snapshot.error}</p>`;
    return;
  }
  if (!route) {
    panel.innerHTML = '<p>Click the map to set start and goal, then query a route.</p>';
    return;
  }
  const rows = attributionRows(route)
    .map(
      (row) =>
        `<tr><td>${row.name}</td><td>${row.share.cellsChosen}</td>` +
        `<td>${row.share.costChosen}</td><td>${row.share.cellsAlternative}</td>` +
        `<td>${row.share.costAlternative}</td></tr>`,
    )
    .join('');
  panel.innerHTML = `
    <p class="summary">${route.explanation.summary}</p>
    <p>cost ${route.total_cost} | distance ${route.total_distance} |
       profile ${route.profile} | model v${route.model_version}</p>
    <table>
      <tr><th>class</th><th>cells</th><th>cost</th>
          <th>alt cells</th><th>alt cost</th></tr>
      ${rows}
    </table>`;
}

export function mountConsole(rootElement: HTMLElement, baseUrl: string): ConsoleController {
  rootElement.innerHTML = `
    <div class="toolbar">
      <input id="ws-id" placeholder="workspace id" />
      <button id="open">Open</button>
      <select id="layer"><option value="semantic">semantic</option></select>
      <select id="profile">
        <option value="safe">safe</option><option value="fast">fast</option>
      </select>
      <input id="blend" type="range" min="0" max="1" step="0.05" value="1" />
      <button id="route">Query route</button>
    </div>
    <canvas id="map"></canvas>
    <div id="panel"></div>`;
  const canvas = rootElement.querySelector('#map') as HTMLCanvasElement;
  const panel = rootElement.querySelector('#panel') as HTMLElement;
  const layerSelect = rootElement.querySelector('#layer') as HTMLSelectElement;

  const controller = new ConsoleController(
    new ApiClient(baseUrl),
    undefined,
    (snapshot) => {
      if (snapshot.frame) drawFrame(canvas, snapshot.frame, snapshot);
      renderPanel(panel, snapshot);
      if (snapshot.info) {
        const layers = ['semantic']
          .concat(snapshot.info.profiles.map((p) => `cost:${p}`))
          .concat(snapshot.lastRoute ? [`route:${snapshot.lastRoute.route_id}`] : []);
        layerSelect.innerHTML = layers
          .map((layer) => `<option value="${layer}">${layer}</option>`)
          .join('');
        layerSelect.value = snapshot.layer;
      }
    },
  );

  (rootElement.querySelector('#open') as HTMLButtonElement).onclick = () => {
    const id = (rootElement.querySelector('#ws-id') as HTMLInputElement).value;
    void controller.openWorkspace(id);
  };
  layerSelect.onchange = () => void controller.setLayer(layerSelect.value);
  (rootElement.querySelector('#profile') as HTMLSelectElement).onchange = (event) =>
    void controller.setProfile((event.target as HTMLSelectElement).value);
  (rootElement.querySelector('#blend') as HTMLInputElement).onchange = (event) =>
    void controller.setBlend(Number((event.target as HTMLInputElement).value));
  (rootElement.querySelector('#route') as HTMLButtonElement).onclick = () =>
    void controller.queryRoute();
  canvas.onclick = (event) => {
    const rect = canvas.getBoundingClientRect();
    const col = Math.floor((event.clientX - rect.left) / SCALE);
    const row = Math.floor((event.clientY - rect.top) / SCALE);
    controller.clickCell([row, col]);
  };
  return controller;
}

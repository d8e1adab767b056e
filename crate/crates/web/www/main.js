import init, { mesh_info, coupling_iterations, cavity_slice } from "./pkg/mhd_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function show(out, fn) {
  out.classList.remove("err");
  out.textContent = "running...";
  // Let the browser paint before the blocking call.
  setTimeout(() => {
    try {
      const t0 = performance.now();
      const result = JSON.parse(fn());
      result.seconds = ((performance.now() - t0) / 1000).toFixed(2);
      out.textContent = JSON.stringify(result, null, 2);
      return result;
    } catch (e) {
      out.classList.add("err");
      out.textContent = String(e);
    }
  }, 20);
}

// Blue (slow) to red (fast), scaled by the lid speed.
function colour(v) {
  const t = Math.max(0, Math.min(1, v));
  return [Math.round(255 * t), Math.round(80 * (1 - Math.abs(2 * t - 1))), Math.round(255 * (1 - t))];
}

function drawSlice(canvas, res, speed) {
  const ctx = canvas.getContext("2d");
  const img = ctx.createImageData(res, res);
  for (let iz = 0; iz < res; iz++) {
    for (let ix = 0; ix < res; ix++) {
      // Row 0 of the image is the top of the cavity (z = 1).
      const [r, g, b] = colour(speed[iz * res + ix]);
      const k = 4 * ((res - 1 - iz) * res + ix);
      img.data.set([r, g, b, 255], k);
    }
  }
  const tmp = document.createElement("canvas");
  tmp.width = tmp.height = res;
  tmp.getContext("2d").putImageData(img, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(tmp, 0, 0, canvas.width, canvas.height);
}

await init();

$("mesh-run").onclick = () => show($("mesh-out"), () => mesh_info(num("mesh-n")));

$("cpl-run").onclick = () =>
  show($("cpl-out"), () => {
    const r = JSON.parse(coupling_iterations(num("cpl-n"), num("cpl-s"), num("cpl-sigma"), $("cpl-variant").value));
    delete r.residuals;
    return JSON.stringify(r);
  });

$("cav-run").onclick = () =>
  show($("cav-out"), () => {
    const r = JSON.parse(cavity_slice(num("cav-n"), num("cav-re"), num("cav-s"), $("cav-variant").value, 64));
    drawSlice($("cav-canvas"), r.resolution, r.speed);
    delete r.speed;
    return JSON.stringify(r);
  });

/**
 * Console entry point: discovers the fleet over the bridge, opens one
 * drone link, and wires telemetry into the panels plus piloting inputs
 * into the 20 Hz command pump.  Rendering runs on animation frames and
 * only repaints what changed; telemetry arrival never blocks the loop.
 */

import { drawAttitude, quatToEulerDeg, unfoldGimbalDeg } from "./attitude";
import { DroneLink } from "./bridge";
import { KeyboardSticks, SERVICE_KEYS } from "./keymap";
import { modelFacts, PARAM_TABLE } from "./params";
import {
  makeButton,
  makeParamRow,
  makeTile,
  PadController,
  type ParamRow,
} from "./panels";
import { CommandPump, StickModel } from "./sticks";
import { LatestStore } from "./store";
import { drawTrace, FlightTrace } from "./trace";

const DEFAULT_WS_PORT = 9200;

const TELEMETRY_TOPICS = [
  "drone/rpy",
  "drone/speed",
  "drone/altitude",
  "drone/state",
  "battery/percentage",
  "link/quality",
  "gimbal/attitude/absolute",
  "camera/zoom",
] as const;

function $(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (el === null) throw new Error(`missing element #${id}`);
  return el;
}

function wsUrl(): string {
  const q = new URLSearchParams(location.search);
  const given = q.get("ws");
  if (given !== null) {
    return given.includes("://") ? given : `ws://${given}`;
  }
  const host = location.hostname || "127.0.0.1";
  return `ws://${host}:${DEFAULT_WS_PORT}`;
}

function waitOpen(link: DroneLink, timeoutMs = 8000): Promise<void> {
  return new Promise((resolve, reject) => {
    if (link.status === "open") {
      resolve();
      return;
    }
    const timer = setTimeout(
      () => reject(new Error("bridge connect timed out")), timeoutMs);
    link.onStatus((s) => {
      if (s === "open") {
        clearTimeout(timer);
        resolve();
      }
    });
  });
}

function num(value: unknown): number {
  return typeof value === "number" ? value : NaN;
}

async function boot(): Promise<void> {
  const url = wsUrl();
  const query = new URLSearchParams(location.search);
  const errorFeed = $("error-feed");
  const pushError = (message: string) => {
    const stamp = new Date().toLocaleTimeString();
    errorFeed.textContent =
      `${stamp}  ${message}\n${errorFeed.textContent ?? ""}`
        .split("\n").slice(0, 4).join("\n");
  };

  // Fleet discovery over a throwaway link, then commit to one drone.
  const probe = new DroneLink({ url, drone: "probe" });
  probe.start();
  let fleet: { name: string; model: string; port: number }[] = [];
  try {
    await waitOpen(probe);
    fleet = await probe.fleetInfo();
  } catch (err) {
    pushError(`fleet discovery failed: ${String(err)}`);
  } finally {
    probe.stop();
  }

  const picker = $("drone-picker") as HTMLSelectElement;
  for (const entry of fleet) {
    const opt = document.createElement("option");
    opt.value = entry.name;
    opt.textContent = entry.name;
    picker.append(opt);
  }
  const wanted = query.get("drone");
  const drone = wanted !== null && fleet.some((d) => d.name === wanted)
    ? wanted
    : (fleet[0]?.name ?? wanted ?? "anafi");
  picker.value = drone;
  picker.addEventListener("change", () => {
    query.set("drone", picker.value);
    location.search = query.toString();
  });

  const modelBadge = $("model-badge");
  modelBadge.textContent = fleet.find((d) => d.name === drone)?.model ?? "-";

  // -- live link -----------------------------------------------------------

  const link = new DroneLink({ url, drone });
  const connBadge = $("conn-badge");
  link.onStatus((s) => {
    connBadge.textContent = s === "open" ? "link up" : s;
    connBadge.className = `badge conn-${s}`;
  });
  link.onError(pushError);
  link.start();
  try {
    await waitOpen(link);
  } catch (err) {
    pushError(String(err));
  }

  const store = new LatestStore();
  const trace = new FlightTrace();
  for (const topic of TELEMETRY_TOPICS) {
    link.subscribe(topic, (payload, stampNs) => {
      store.put(topic, payload, stampNs);
      if (topic === "drone/speed") {
        trace.push(stampNs, num(payload.x), num(payload.y));
      }
    });
  }

  // -- telemetry tiles -------------------------------------------------------

  const tiles = $("tiles");
  const altitudeTile = makeTile("altitude");
  const speedTile = makeTile("speed");
  const batteryTile = makeTile("battery");
  const linkTile = makeTile("link quality");
  const zoomTile = makeTile("zoom");
  const gimbalTile = makeTile("gimbal pitch");
  tiles.append(altitudeTile.root, speedTile.root, batteryTile.root,
               linkTile.root, zoomTile.root, gimbalTile.root);

  // -- flight buttons --------------------------------------------------------

  const buttons = $("flight-buttons");
  const callService = (service: string) => {
    link.call(service)
      .then((reply) => {
        if (reply.success === false) {
          pushError(`${service}: ${String(reply.message ?? "refused")}`);
        }
      })
      .catch((err) => pushError(`${service}: ${String(err)}`));
  };
  buttons.append(
    makeButton("take off", "", () => callService("drone/takeoff")),
    makeButton("land", "", () => callService("drone/land")),
    makeButton("return home", "", () => callService("drone/rth")),
    makeButton("halt", "", () => callService("drone/halt")),
    makeButton("emergency", "danger", () => callService("drone/emergency")),
  );

  // -- gimbal and zoom sliders ----------------------------------------------

  const gimbalSlider = $("gimbal-slider") as HTMLInputElement;
  const gimbalValue = $("gimbal-slider-value");
  const zoomSlider = $("zoom-slider") as HTMLInputElement;
  const zoomValue = $("zoom-slider-value");

  link.paramGet("drone/model")
    .then((model) => {
      const facts = modelFacts(String(model));
      modelBadge.textContent = String(model);
      gimbalSlider.min = String(facts.gimbalPitchMin);
      gimbalSlider.max = String(facts.gimbalPitchMax);
      zoomSlider.max = String(facts.maxZoom);
    })
    .catch(() => {
      /* eventual reconnect repeats nothing here; defaults stand */
    });

  gimbalSlider.addEventListener("input", () => {
    gimbalValue.textContent = `${gimbalSlider.value}°`;
    link.publish("gimbal/command", {
      mode: 0,
      frame: 2,
      roll: 0.0,
      pitch: Number(gimbalSlider.value),
      yaw: 0.0,
    });
  });
  zoomSlider.addEventListener("input", () => {
    zoomValue.textContent = `${Number(zoomSlider.value).toFixed(1)}x`;
    link.publish("camera/command", {
      mode: 0,
      zoom: Number(zoomSlider.value),
    });
  });

  // -- parameter drawer --------------------------------------------------------

  const drawer = $("param-drawer") as HTMLDetailsElement;
  const paramList = $("param-list");
  const rows = new Map<string, ParamRow>();
  for (const spec of PARAM_TABLE) {
    const row = makeParamRow(spec, (value) => link.paramSet(spec.name, value));
    rows.set(spec.name, row);
    paramList.append(row.root);
  }
  let drawerLoaded = false;
  drawer.addEventListener("toggle", () => {
    if (!drawer.open || drawerLoaded) return;
    drawerLoaded = true;
    (async () => {
      for (const spec of PARAM_TABLE) {
        try {
          rows.get(spec.name)?.show(await link.paramGet(spec.name));
        } catch {
          break; // link dropped; reopen the drawer to retry
        }
      }
    })();
  });

  // -- piloting ----------------------------------------------------------------

  const sticks = new StickModel();
  const keyboard = new KeyboardSticks();
  const overrideBadge = $("override-badge");
  const pump = new CommandPump(sticks, (frame) => {
    link.publish("skycontroller/command", frame);
  });
  setInterval(() => {
    pump.tick(performance.now());
    overrideBadge.classList.toggle("hidden", !pump.active());
  }, 25);

  const syncKeyboard = () => {
    sticks.setSource("keyboard", keyboard.active(), keyboard.axes());
  };
  window.addEventListener("keydown", (ev) => {
    const target = ev.target as HTMLElement | null;
    if (target !== null
        && ["INPUT", "SELECT", "TEXTAREA"].includes(target.tagName)) {
      return;
    }
    if (keyboard.keydown(ev.code)) {
      ev.preventDefault();
      syncKeyboard();
      return;
    }
    const service = SERVICE_KEYS[ev.code];
    if (service !== undefined && !ev.repeat) {
      ev.preventDefault();
      callService(service);
    }
  });
  window.addEventListener("keyup", (ev) => {
    if (keyboard.keyup(ev.code)) syncKeyboard();
  });
  window.addEventListener("blur", () => {
    keyboard.releaseAll();
    syncKeyboard();
  });

  // Left pad: climb (up) and turn (left = positive yaw).
  new PadController($("pad-left"), (reading) => {
    if (reading === null) sticks.setSource("pad-left", false);
    else {
      sticks.setSource("pad-left", true, {
        z: reading.y * 100,
        yaw: -reading.x * 100,
      });
    }
  });
  // Right pad: pitch (up = forward) and roll.
  new PadController($("pad-right"), (reading) => {
    if (reading === null) sticks.setSource("pad-right", false);
    else {
      sticks.setSource("pad-right", true, {
        x: reading.y * 100,
        y: reading.x * 100,
      });
    }
  });

  // -- render loop ---------------------------------------------------------------

  const attitudeCanvas = $("attitude") as HTMLCanvasElement;
  const mapCanvas = $("map") as HTMLCanvasElement;
  const attitudeCtx = attitudeCanvas.getContext("2d");
  const mapCtx = mapCanvas.getContext("2d");
  const rpyReadout = $("rpy-readout");
  const posReadout = $("pos-readout");
  const stateBadge = $("state-badge");

  let paintedRev = -1;
  let lastRateUpdate = 0;

  const render = (nowMs: number) => {
    requestAnimationFrame(render);
    if (store.revision === paintedRev) return;
    paintedRev = store.revision;

    const rpy = store.get("drone/rpy");
    if (rpy !== undefined && attitudeCtx !== null) {
      const angles = {
        roll: num(rpy.payload.x),
        pitch: num(rpy.payload.y),
        yaw: num(rpy.payload.z),
      };
      drawAttitude(attitudeCtx, attitudeCanvas.width, angles);
      rpyReadout.textContent =
        `r ${angles.roll.toFixed(1)}  p ${angles.pitch.toFixed(1)}`
        + `  y ${angles.yaw.toFixed(1)}`;
      if (mapCtx !== null) {
        drawTrace(mapCtx, mapCanvas.width, mapCanvas.height, trace, angles.yaw);
      }
      const pos = trace.position();
      posReadout.textContent = `n ${pos.n.toFixed(1)}  w ${pos.w.toFixed(1)}`;
    }

    const state = store.get("drone/state");
    if (state !== undefined) {
      const name = String(state.payload.data ?? "-");
      stateBadge.textContent = name;
      stateBadge.className = `badge state-${name}`;
    }

    const altitude = store.get("drone/altitude");
    if (altitude !== undefined) {
      altitudeTile.set(`${num(altitude.payload.data).toFixed(1)} m`);
    }
    const speed = store.get("drone/speed");
    if (speed !== undefined) {
      const vx = num(speed.payload.x);
      const vy = num(speed.payload.y);
      const vz = num(speed.payload.z);
      speedTile.set(`${Math.hypot(vx, vy).toFixed(1)} m/s`);
      speedTile.setSub(`v ${vx.toFixed(1)} / ${vy.toFixed(1)} / ${vz.toFixed(1)}`);
    }
    const battery = store.get("battery/percentage");
    if (battery !== undefined) {
      batteryTile.set(`${num(battery.payload.data).toFixed(0)} %`);
    }
    const quality = store.get("link/quality");
    if (quality !== undefined) {
      linkTile.set(`${num(quality.payload.data).toFixed(0)} / 5`);
    }
    const zoom = store.get("camera/zoom");
    if (zoom !== undefined) {
      zoomTile.set(`${num(zoom.payload.data).toFixed(1)} x`);
    }
    const gimbal = store.get("gimbal/attitude/absolute");
    if (gimbal !== undefined) {
      const euler = unfoldGimbalDeg(quatToEulerDeg(
        num(gimbal.payload.w), num(gimbal.payload.x),
        num(gimbal.payload.y), num(gimbal.payload.z)));
      gimbalTile.set(`${euler.pitch.toFixed(1)}°`);
    }

    if (nowMs - lastRateUpdate > 500) {
      lastRateUpdate = nowMs;
      const now = Date.now();
      altitudeTile.setSub(`${store.rateHz("drone/altitude", now).toFixed(0)} Hz`);
      batteryTile.setSub(`${store.rateHz("battery/percentage", now).toFixed(0)} Hz`);
      linkTile.setSub(`${store.rateHz("link/quality", now).toFixed(0)} Hz`);
      zoomTile.setSub(`${store.rateHz("camera/zoom", now).toFixed(0)} Hz`);
      gimbalTile.setSub(
        `${store.rateHz("gimbal/attitude/absolute", now).toFixed(0)} Hz`);
    }
  };
  requestAnimationFrame(render);
}

boot().catch((err) => {
  const feed = document.getElementById("error-feed");
  if (feed !== null) feed.textContent = String(err);
});

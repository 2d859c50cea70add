/**
 * Small DOM builders for the console: telemetry tiles, the parameter
 * drawer rows, and the on-screen stick pads (pointer capture drives the
 * deadman while a pad is held).
 */

import { modelFacts, sliderStep, type ParamSpec } from "./params";

export interface Tile {
  root: HTMLElement;
  set(value: string): void;
  setSub(text: string): void;
}

export function makeTile(title: string): Tile {
  const root = document.createElement("div");
  root.className = "tile";
  const head = document.createElement("div");
  head.className = "tile-title";
  head.textContent = title;
  const value = document.createElement("div");
  value.className = "tile-value";
  value.textContent = "-";
  const sub = document.createElement("div");
  sub.className = "tile-sub";
  sub.textContent = "";
  root.append(head, value, sub);
  let lastValue = "";
  let lastSub = "";
  return {
    root,
    set(v: string) {
      if (v !== lastValue) {
        lastValue = v;
        value.textContent = v;
      }
    },
    setSub(t: string) {
      if (t !== lastSub) {
        lastSub = t;
        sub.textContent = t;
      }
    },
  };
}

export function makeButton(label: string, className: string,
                           onClick: () => void): HTMLButtonElement {
  const btn = document.createElement("button");
  btn.textContent = label;
  btn.className = className;
  btn.addEventListener("click", onClick);
  return btn;
}

// -- parameter drawer -------------------------------------------------------

export interface ParamRow {
  root: HTMLElement;
  /** Reflect a value reported by the drone into the controls. */
  show(value: unknown): void;
}

export function makeParamRow(
  spec: ParamSpec,
  apply: (value: number | boolean | string) => Promise<unknown>,
): ParamRow {
  const root = document.createElement("div");
  root.className = "param-row";
  const label = document.createElement("label");
  label.textContent = spec.label;
  label.title = spec.name + (spec.unit ? ` (${spec.unit})` : "");
  root.append(label);

  const report = document.createElement("span");
  report.className = "param-value";
  report.textContent = "-";

  const send = (value: number | boolean | string) => {
    apply(value)
      .then((applied) => show(applied))
      .catch(() => {
        /* surfaced via the link error feed */
      });
  };

  let show: (value: unknown) => void;

  if (spec.readOnly) {
    show = (value) => {
      report.textContent = String(value ?? "-");
    };
    root.append(report);
  } else if (spec.kind === "float" && spec.min !== undefined
             && spec.max !== undefined) {
    const slider = document.createElement("input");
    slider.type = "range";
    slider.min = String(spec.min);
    slider.max = String(spec.max);
    slider.step = String(sliderStep(spec));
    slider.value = String(spec.default ?? spec.min);
    slider.addEventListener("change", () => send(Number(slider.value)));
    show = (value) => {
      const v = typeof value === "number" ? value : Number(value);
      if (Number.isFinite(v)) {
        slider.value = String(v);
        report.textContent = v.toFixed(2) + (spec.unit ? ` ${spec.unit}` : "");
      }
    };
    root.append(slider, report);
  } else if (spec.kind === "int" && spec.choices !== undefined) {
    const select = document.createElement("select");
    for (const choice of spec.choices) {
      const opt = document.createElement("option");
      opt.value = String(choice);
      opt.textContent = String(choice);
      select.append(opt);
    }
    select.addEventListener("change", () => send(Number(select.value)));
    show = (value) => {
      select.value = String(value);
      report.textContent = String(value);
    };
    root.append(select, report);
  } else if (spec.kind === "bool") {
    const box = document.createElement("input");
    box.type = "checkbox";
    box.checked = Boolean(spec.default);
    box.addEventListener("change", () => send(box.checked));
    show = (value) => {
      box.checked = Boolean(value);
      report.textContent = value ? "on" : "off";
    };
    root.append(box, report);
  } else {
    const field = document.createElement("input");
    field.type = "text";
    field.value = String(spec.default ?? "");
    field.addEventListener("change", () => send(field.value));
    show = (value) => {
      field.value = String(value ?? "");
      report.textContent = "";
    };
    root.append(field, report);
  }

  return { root, show };
}

// -- stick pads --------------------------------------------------------------

export interface PadReading {
  /** Both in [-1, 1]; x right, y up.  Null while the pad is released. */
  x: number;
  y: number;
}

/**
 * One on-screen stick.  Pointer capture keeps the stick alive while the
 * finger wanders outside the pad; release snaps to center and reports null.
 */
export class PadController {
  private reading: PadReading | null = null;
  private pointerId: number | null = null;
  private readonly knob: HTMLElement;

  constructor(private readonly root: HTMLElement,
              private readonly onChange: (reading: PadReading | null) => void) {
    this.knob = document.createElement("div");
    this.knob.className = "pad-knob";
    root.append(this.knob);
    root.addEventListener("pointerdown", (ev) => this.down(ev));
    root.addEventListener("pointermove", (ev) => this.move(ev));
    root.addEventListener("pointerup", (ev) => this.up(ev));
    root.addEventListener("pointercancel", (ev) => this.up(ev));
    this.paint();
  }

  /** Null when released; the deadman follows non-null readings. */
  value(): PadReading | null {
    return this.reading;
  }

  private down(ev: PointerEvent): void {
    this.pointerId = ev.pointerId;
    this.root.setPointerCapture(ev.pointerId);
    this.apply(ev);
  }

  private move(ev: PointerEvent): void {
    if (ev.pointerId !== this.pointerId) return;
    this.apply(ev);
  }

  private up(ev: PointerEvent): void {
    if (ev.pointerId !== this.pointerId) return;
    this.pointerId = null;
    this.reading = null;
    this.paint();
    this.onChange(null);
  }

  private apply(ev: PointerEvent): void {
    const rect = this.root.getBoundingClientRect();
    const half = Math.min(rect.width, rect.height) / 2;
    const dx = ev.clientX - (rect.left + rect.width / 2);
    const dy = ev.clientY - (rect.top + rect.height / 2);
    const clamp = (v: number) => Math.max(-1, Math.min(1, v));
    this.reading = { x: clamp(dx / half), y: clamp(-dy / half) };
    this.paint();
    this.onChange(this.reading);
  }

  private paint(): void {
    const r = this.reading ?? { x: 0, y: 0 };
    this.knob.style.transform =
      `translate(${r.x * 34}px, ${-r.y * 34}px)`;
    this.root.classList.toggle("pad-live", this.reading !== null);
  }
}

export { modelFacts };

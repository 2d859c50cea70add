/**
 * Client-side copy of the drone parameter registry, used to build the
 * settings drawer: range sliders for floats, pickers for enumerations,
 * switches for booleans.  The daemon remains the authority; every set
 * round-trips and the UI shows the value the drone actually stored.
 */

export type ParamKind = "float" | "int" | "bool" | "string";

export interface ParamSpec {
  name: string;
  kind: ParamKind;
  default: number | boolean | string | null;
  min?: number;
  max?: number;
  choices?: readonly (number | string)[];
  unit?: string;
  readOnly?: boolean;
  label: string;
}

function f(name: string, dflt: number, min: number, max: number, unit: string,
           label: string): ParamSpec {
  return { name, kind: "float", default: dflt, min, max, unit, label };
}

function i(name: string, dflt: number, choices: readonly number[],
           label: string): ParamSpec {
  return { name, kind: "int", default: dflt, choices, label };
}

function b(name: string, dflt: boolean, label: string): ParamSpec {
  return { name, kind: "bool", default: dflt, label };
}

export const PARAM_TABLE: readonly ParamSpec[] = [
  b("camera/autorecord", false, "record on take-off"),
  i("camera/ev_compensation", 9, [0, 3, 6, 9, 12, 15, 18], "EV compensation"),
  b("camera/hdr", true, "HDR capture"),
  f("camera/max_zoom_speed", 10.0, 0.1, 10.0, "tan(deg)/s", "zoom slew limit"),
  i("camera/mode", 0, [0, 1], "camera mode (0 rec, 1 photo)"),
  b("camera/relative", false, "camera-relative commands"),
  i("camera/rendering", 0, [0, 1, 2], "stream rendering"),
  i("camera/streaming", 0, [0, 1, 2], "streaming mode"),
  i("camera/style", 0, [0, 1, 2, 3], "image style"),
  b("drone/banked_turn", true, "banked turns"),
  f("drone/max_altitude", 2.0, 0.5, 4000.0, "m", "altitude ceiling"),
  f("drone/max_distance", 10.0, 10.0, 4000.0, "m", "distance fence"),
  f("drone/max_horizontal_speed", 1.0, 0.1, 15.0, "m/s", "horizontal speed"),
  f("drone/max_pitch_roll", 10.0, 1.0, 40.0, "deg", "tilt limit"),
  f("drone/max_pitch_roll_rate", 200.0, 40.0, 300.0, "deg/s", "tilt rate"),
  f("drone/max_vertical_speed", 1.0, 0.1, 4.0, "m/s", "vertical speed"),
  f("drone/max_yaw_rate", 180.0, 3.0, 200.0, "deg/s", "yaw rate"),
  {
    name: "drone/model",
    kind: "string",
    default: null,
    choices: ["4k", "thermal", "usa", "ai", "unknown"],
    readOnly: true,
    label: "airframe model",
  },
  f("gimbal/max_speed", 180.0, 1.0, 180.0, "deg/s", "gimbal slew limit"),
  b("home/autotrigger", true, "RTH on low battery"),
  i("home/ending_behavior", 1, [0, 1], "RTH ending (0 land, 1 hover)"),
  f("home/min_altitude", 20.0, 20.0, 100.0, "m", "RTH altitude"),
  b("home/precise", true, "precise home"),
  i("home/type", 4, [1, 3, 4], "home type (1 take-off, 3 custom, 4 pilot)"),
  {
    name: "storage/download_folder",
    kind: "string",
    default: "~/Pictures/Anafi",
    label: "download folder",
  },
];

export function paramSpec(name: string): ParamSpec | undefined {
  return PARAM_TABLE.find((s) => s.name === name);
}

/** Per-airframe display facts: zoom ceiling and gimbal pitch travel (deg). */
export interface ModelFacts {
  maxZoom: number;
  gimbalPitchMin: number;
  gimbalPitchMax: number;
}

export const MODEL_FACTS: Readonly<Record<string, ModelFacts>> = {
  "4k": { maxZoom: 3.0, gimbalPitchMin: -90, gimbalPitchMax: 90 },
  thermal: { maxZoom: 3.0, gimbalPitchMin: -90, gimbalPitchMax: 90 },
  usa: { maxZoom: 32.0, gimbalPitchMin: -90, gimbalPitchMax: 90 },
  ai: { maxZoom: 6.0, gimbalPitchMin: -116, gimbalPitchMax: 176 },
};

export const DEFAULT_MODEL_FACTS: ModelFacts = {
  maxZoom: 3.0,
  gimbalPitchMin: -90,
  gimbalPitchMax: 90,
};

export function modelFacts(model: string): ModelFacts {
  return MODEL_FACTS[model] ?? DEFAULT_MODEL_FACTS;
}

/** Slider step for a float parameter, scaled to its span. */
export function sliderStep(spec: ParamSpec): number {
  if (spec.kind !== "float" || spec.min === undefined || spec.max === undefined) {
    return 1;
  }
  const span = spec.max - spec.min;
  if (span > 1000) return 1;
  if (span > 100) return 0.5;
  if (span > 10) return 0.1;
  return 0.01;
}

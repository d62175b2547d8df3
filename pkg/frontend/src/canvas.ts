// Minimal drawing surface the views target. A real 2D canvas context
// satisfies it structurally (cast at the mount point); tests use the
// recording implementation below and snapshot the op log.

export interface Canvas2D {
  fillStyle: string;
  strokeStyle: string;
  lineWidth: number;
  globalAlpha: number;
  font: string;
  textAlign: string;
  textBaseline: string;
  clearRect(x: number, y: number, w: number, h: number): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  closePath(): void;
  stroke(): void;
  fill(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  fillText(text: string, x: number, y: number): void;
  setLineDash(segments: number[]): void;
  save(): void;
  restore(): void;
}

const round = (v: number) => {
  const r = Math.round(v * 100) / 100;
  return Object.is(r, -0) ? 0 : r;
};

/** Records every drawing operation as a readable line. */
export class RecordingContext implements Canvas2D {
  ops: string[] = [];

  private _fillStyle = "#000000";
  private _strokeStyle = "#000000";
  private _lineWidth = 1;
  private _globalAlpha = 1;
  private _font = "10px sans-serif";
  private _textAlign = "start";
  private _textBaseline = "alphabetic";

  get fillStyle() {
    return this._fillStyle;
  }
  set fillStyle(v: string) {
    this._fillStyle = v;
    this.ops.push(`fillStyle=${v}`);
  }
  get strokeStyle() {
    return this._strokeStyle;
  }
  set strokeStyle(v: string) {
    this._strokeStyle = v;
    this.ops.push(`strokeStyle=${v}`);
  }
  get lineWidth() {
    return this._lineWidth;
  }
  set lineWidth(v: number) {
    this._lineWidth = v;
    this.ops.push(`lineWidth=${round(v)}`);
  }
  get globalAlpha() {
    return this._globalAlpha;
  }
  set globalAlpha(v: number) {
    this._globalAlpha = v;
    this.ops.push(`globalAlpha=${round(v)}`);
  }
  get font() {
    return this._font;
  }
  set font(v: string) {
    this._font = v;
    this.ops.push(`font=${v}`);
  }
  get textAlign() {
    return this._textAlign;
  }
  set textAlign(v: string) {
    this._textAlign = v;
    this.ops.push(`textAlign=${v}`);
  }
  get textBaseline() {
    return this._textBaseline;
  }
  set textBaseline(v: string) {
    this._textBaseline = v;
    this.ops.push(`textBaseline=${v}`);
  }

  clearRect(x: number, y: number, w: number, h: number) {
    this.ops.push(`clearRect(${round(x)},${round(y)},${round(w)},${round(h)})`);
  }
  fillRect(x: number, y: number, w: number, h: number) {
    this.ops.push(`fillRect(${round(x)},${round(y)},${round(w)},${round(h)})`);
  }
  strokeRect(x: number, y: number, w: number, h: number) {
    this.ops.push(`strokeRect(${round(x)},${round(y)},${round(w)},${round(h)})`);
  }
  beginPath() {
    this.ops.push("beginPath()");
  }
  moveTo(x: number, y: number) {
    this.ops.push(`moveTo(${round(x)},${round(y)})`);
  }
  lineTo(x: number, y: number) {
    this.ops.push(`lineTo(${round(x)},${round(y)})`);
  }
  closePath() {
    this.ops.push("closePath()");
  }
  stroke() {
    this.ops.push("stroke()");
  }
  fill() {
    this.ops.push("fill()");
  }
  arc(x: number, y: number, r: number, a0: number, a1: number) {
    this.ops.push(`arc(${round(x)},${round(y)},${round(r)},${round(a0)},${round(a1)})`);
  }
  fillText(text: string, x: number, y: number) {
    this.ops.push(`fillText(${JSON.stringify(text)},${round(x)},${round(y)})`);
  }
  setLineDash(segments: number[]) {
    this.ops.push(`setLineDash([${segments.map(round).join(",")}])`);
  }
  save() {
    this.ops.push("save()");
  }
  restore() {
    this.ops.push("restore()");
  }
}

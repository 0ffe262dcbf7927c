import type { CartPayloadLine, SlateResponse } from "./types.js";

export type SlateFetcher = (cart: CartPayloadLine[]) => Promise<SlateResponse>;

// Refresh coordinator for the recommendation strip: rapid cart edits coalesce
// into one request per debounce window, at most one request is in flight, and
// a response for an older cart snapshot is never applied over a newer one.
export class SlateRefresher {
  private latest: CartPayloadLine[] = [];
  private timer: ReturnType<typeof setTimeout> | undefined;
  private inFlight = false;
  private rerunAfterFlight = false;
  private requestCounter = 0;
  private lastApplied = 0;

  constructor(
    private readonly fetchSlate: SlateFetcher,
    private readonly onSlate: (slate: SlateResponse) => void,
    private readonly onError: () => void,
    private readonly debounceMs = 200,
  ) {}

  /** Note the newest cart state and schedule a refresh. */
  request(cart: CartPayloadLine[]): void {
    this.latest = cart;
    if (this.timer !== undefined) return; // coalesce into the pending window
    this.timer = setTimeout(() => {
      this.timer = undefined;
      void this.fire();
    }, this.debounceMs);
  }

  private async fire(): Promise<void> {
    if (this.inFlight) {
      this.rerunAfterFlight = true;
      return;
    }
    this.inFlight = true;
    const snapshot = this.latest;
    const requestId = ++this.requestCounter;
    try {
      const slate = await this.fetchSlate(snapshot);
      // discard responses for an older cart snapshot or out-of-order arrivals
      if (requestId > this.lastApplied && this.latest === snapshot) {
        this.lastApplied = requestId;
        this.onSlate(slate);
      }
    } catch {
      this.onError(); // hide the strip instead of showing stale items
    } finally {
      this.inFlight = false;
      if (this.rerunAfterFlight || this.latest !== snapshot) {
        this.rerunAfterFlight = false;
        this.request(this.latest);
      }
    }
  }
}

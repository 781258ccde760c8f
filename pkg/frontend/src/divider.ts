/**
 * Draggable split between the chat column and the map pane.
 * The map keeps at least 60% of the width by default.
 */

export const DEFAULT_CHAT_FRACTION = 0.4;
const MIN_CHAT_FRACTION = 0.2;
const MAX_CHAT_FRACTION = 0.55;

export function initDivider(
  container: HTMLElement,
  chatPane: HTMLElement,
  divider: HTMLElement,
  onResize?: () => void,
): void {
  chatPane.style.width = `${DEFAULT_CHAT_FRACTION * 100}%`;

  divider.addEventListener("pointerdown", (down) => {
    down.preventDefault();
    divider.setPointerCapture(down.pointerId);

    const move = (event: PointerEvent) => {
      const box = container.getBoundingClientRect();
      if (box.width <= 0) return;
      const fraction = (event.clientX - box.left) / box.width;
      const clamped = Math.min(
        Math.max(fraction, MIN_CHAT_FRACTION),
        MAX_CHAT_FRACTION,
      );
      chatPane.style.width = `${clamped * 100}%`;
      onResize?.();
    };
    const stop = () => {
      divider.removeEventListener("pointermove", move);
      divider.removeEventListener("pointerup", stop);
      onResize?.();
    };
    divider.addEventListener("pointermove", move);
    divider.addEventListener("pointerup", stop);
  });
}

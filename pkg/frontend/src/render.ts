import { EventCategory, RecommendResponse, StylePattern } from './api.js';
import { HistoryEntry } from './state.js';

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

/**
 * Render ranked proposal cards into `container`, in server order.
 * The displayed order is exactly `response.proposals` — never re-sorted.
 */
export function renderRecommendations(
  container: HTMLElement,
  response: RecommendResponse,
): void {
  const doc = container.ownerDocument;
  container.replaceChildren();

  if (response.shortfall > 0) {
    const notice = el(
      doc,
      'p',
      'shortfall-notice',
      `Only ${response.proposals.length} of ${response.k} requested ` +
        `proposals available (short by ${response.shortfall}).`,
    );
    notice.setAttribute('role', 'status');
    container.appendChild(notice);
  }

  const list = el(doc, 'ol', 'proposal-list');
  response.proposals.forEach((p, i) => {
    const card = el(doc, 'li', 'proposal-card');
    card.dataset.bottomId = p.bottom_id;
    card.dataset.rank = String(i + 1);

    card.appendChild(el(doc, 'span', 'rank', `#${i + 1}`));
    card.appendChild(el(doc, 'span', 'bottom-id', p.bottom_id));
    card.appendChild(el(doc, 'span', 'score', p.score.toFixed(4)));

    if (p.style) {
      const badge = el(
        doc,
        'span',
        p.style.accepted ? 'badge accepted' : 'badge rejected',
        p.style.accepted
          ? `${p.style.pattern_name} (d*=${p.style.d_star.toFixed(2)})`
          : `no style (d*=${p.style.d_star.toFixed(2)})`,
      );
      card.appendChild(badge);
    }

    if (p.event_posterior) {
      const bar = el(doc, 'div', 'posterior-bar');
      const peak = Math.max(...p.event_posterior);
      p.event_posterior.forEach((v, idx) => {
        const seg = el(doc, 'span', 'posterior-seg');
        seg.style.height = `${Math.round(v * 100)}%`;
        seg.dataset.category = String(idx);
        if (v === peak) seg.classList.add('argmax');
        bar.appendChild(seg);
      });
      card.appendChild(bar);
    }
    list.appendChild(card);
  });
  container.appendChild(list);
}

/** Show a dismissible error banner; nothing else in `container` changes. */
export function renderError(container: HTMLElement, message: string): void {
  const doc = container.ownerDocument;
  const banner = el(doc, 'div', 'error-banner');
  banner.setAttribute('role', 'alert');
  banner.appendChild(el(doc, 'span', 'error-text', message));
  const dismiss = el(doc, 'button', 'dismiss', 'Dismiss');
  dismiss.addEventListener('click', () => banner.remove());
  banner.appendChild(dismiss);
  container.prepend(banner);
}

/**
 * Fill the condition target selects from the server lists. No hardcoded
 * category names anywhere in the UI.
 */
export function renderConditionOptions(
  styleSelect: HTMLSelectElement,
  eventSelect: HTMLSelectElement,
  patterns: StylePattern[],
  events: EventCategory[],
): void {
  const doc = styleSelect.ownerDocument;
  styleSelect.replaceChildren();
  for (const p of patterns) {
    const opt = doc.createElement('option');
    opt.value = String(p.id);
    opt.textContent = p.name;
    styleSelect.appendChild(opt);
  }
  eventSelect.replaceChildren();
  for (const c of events) {
    const opt = doc.createElement('option');
    opt.value = String(c.id);
    opt.textContent = c.name;
    eventSelect.appendChild(opt);
  }
}

/** Append-only history panel: one row per past (query, response) pair. */
export function renderHistory(
  container: HTMLElement,
  history: ReadonlyArray<HistoryEntry>,
): void {
  const doc = container.ownerDocument;
  container.replaceChildren();
  const list = el(doc, 'ul', 'history-list');
  for (const entry of history) {
    const cond =
      entry.request.kind === 'none'
        ? 'unconditioned'
        : `${entry.request.kind}=${entry.request.target} (${entry.request.mode})`;
    const row = el(
      doc,
      'li',
      'history-row',
      `k=${entry.request.k} ${cond} -> ${entry.response.proposals.length} proposals`,
    );
    list.appendChild(row);
  }
  container.appendChild(list);
}

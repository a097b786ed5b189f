import { ConditionKind, ConditionMode, ServiceClient } from './api.js';
import {
  renderConditionOptions,
  renderError,
  renderHistory,
  renderRecommendations,
} from './render.js';
import { initialState, QueryState, setCondition, setK, submitQuery } from './state.js';

function byId<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

async function boot(): Promise<void> {
  const client = new ServiceClient(window.location.origin);
  let state: QueryState = initialState();

  const results = byId<HTMLElement>('results');
  const historyPanel = byId<HTMLElement>('history');
  const styleSelect = byId<HTMLSelectElement>('style-target');
  const eventSelect = byId<HTMLSelectElement>('event-target');
  const kindSelect = byId<HTMLSelectElement>('condition-kind');
  const modeSelect = byId<HTMLSelectElement>('condition-mode');
  const kSlider = byId<HTMLInputElement>('k-slider');
  const kLabel = byId<HTMLElement>('k-label');
  const fileInput = byId<HTMLInputElement>('top-file');
  const form = byId<HTMLFormElement>('query-form');

  try {
    const [patterns, events] = await Promise.all([
      client.getPatterns(),
      client.getEvents(),
    ]);
    renderConditionOptions(styleSelect, eventSelect, patterns, events);
  } catch (err) {
    renderError(results, err instanceof Error ? err.message : String(err));
    return;
  }

  kSlider.addEventListener('input', () => {
    state = setK(state, Number(kSlider.value));
    kLabel.textContent = kSlider.value;
  });

  fileInput.addEventListener('change', () => {
    const file = fileInput.files?.[0] ?? null;
    state = { ...state, topFile: file, topFileName: file?.name ?? null };
  });

  const syncCondition = () => {
    const kind = kindSelect.value as ConditionKind;
    const mode = modeSelect.value as ConditionMode;
    const target =
      kind === 'style'
        ? styleSelect.value
        : kind === 'event'
          ? eventSelect.value
          : null;
    state = setCondition(state, kind, target, mode);
    styleSelect.disabled = kind !== 'style';
    eventSelect.disabled = kind !== 'event';
  };
  for (const sel of [kindSelect, modeSelect, styleSelect, eventSelect]) {
    sel.addEventListener('change', syncCondition);
  }
  syncCondition();

  form.addEventListener('submit', async (ev) => {
    ev.preventDefault();
    try {
      state = await submitQuery(state, client);
      if (state.lastResponse) renderRecommendations(results, state.lastResponse);
      renderHistory(historyPanel, state.history);
    } catch (err) {
      // state (and history) untouched on failure; the form stays submittable
      renderError(results, err instanceof Error ? err.message : String(err));
    }
  });
}

boot();

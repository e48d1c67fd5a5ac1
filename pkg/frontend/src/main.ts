// Page bootstrap: mount the editor against a session API endpoint.

import { CowriteEditor } from './editor.js';

function apiBase(): string {
  const params = new URLSearchParams(window.location.search);
  return params.get('api') ?? 'http://127.0.0.1:8080';
}

const root = document.getElementById('app');
if (root !== null) {
  const editor = new CowriteEditor({
    root,
    baseUrl: apiBase(),
    paradigm: new URLSearchParams(window.location.search).get('paradigm') ?? 'L1',
  });
  void editor.init().catch((error) => {
    root.textContent = `could not reach the session API at ${apiBase()}: ${error}`;
  });
  window.addEventListener('beforeunload', () => editor.dispose());
}

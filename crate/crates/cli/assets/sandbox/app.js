// Sandbox chat client. All state comes from the message stream.
(() => {
  const log = document.getElementById("log");
  const banner = document.getElementById("banner");
  const bannerText = document.getElementById("banner-text");
  const text = document.getElementById("text");
  const send = document.querySelector("#composer button");
  let ws = null;
  let persona = null;
  let counter = 0;

  function bubble(cls) {
    const div = document.createElement("div");
    div.className = "bubble " + cls;
    log.appendChild(div);
    log.scrollTop = log.scrollHeight;
    return div;
  }

  function frame(message) {
    return JSON.stringify({
      object: "sandbox",
      entry: [{ id: "0", changes: [{ field: "messages", value: { messaging_product: "sandbox", messages: [message] } }] }],
    });
  }

  function base(type) {
    counter += 1;
    return { from: persona, id: `web-${Date.now()}-${counter}`, timestamp: Date.now(), type };
  }

  function sendText(body) {
    const m = base("text");
    m.text = { body };
    bubble("in").textContent = body;
    ws.send(frame(m));
  }

  function sendTap(id, title, list) {
    const m = base("interactive");
    const kind = list ? "list_reply" : "button_reply";
    m.interactive = { type: kind, [kind]: { id, title } };
    bubble("in").textContent = title;
    ws.send(frame(m));
  }

  function render(msg) {
    const div = bubble("out");
    const body = msg.text ? msg.text.body : msg.interactive.body.text;
    const p = document.createElement("div");
    p.textContent = body;
    div.appendChild(p);
    if (!msg.interactive) return;
    const action = msg.interactive.action;
    if (action.buttons) {
      const chips = document.createElement("div");
      chips.className = "chips";
      for (const b of action.buttons) {
        const btn = document.createElement("button");
        btn.textContent = b.reply.title;
        btn.dataset.id = b.reply.id;
        btn.onclick = () => sendTap(b.reply.id, b.reply.title, false);
        chips.appendChild(btn);
      }
      div.appendChild(chips);
    }
    if (action.sections) {
      const rows = document.createElement("div");
      rows.className = "rows";
      rows.hidden = true;
      const open = document.createElement("button");
      open.textContent = action.button;
      open.onclick = () => { rows.hidden = !rows.hidden; };
      const chips = document.createElement("div");
      chips.className = "chips";
      chips.appendChild(open);
      div.appendChild(chips);
      for (const s of action.sections) {
        const h = document.createElement("div");
        h.className = "section";
        h.textContent = s.title;
        rows.appendChild(h);
        for (const r of s.rows) {
          const btn = document.createElement("button");
          btn.dataset.id = r.id;
          btn.textContent = r.title;
          if (r.description) {
            const d = document.createElement("small");
            d.textContent = r.description;
            btn.appendChild(d);
          }
          btn.onclick = () => sendTap(r.id, r.title, true);
          rows.appendChild(btn);
        }
      }
      div.appendChild(rows);
    }
  }

  function showError(msg) {
    bannerText.textContent = msg;
    banner.hidden = false;
    text.disabled = send.disabled = true;
  }

  function connect() {
    const prefix = document.getElementById("prefix").value;
    const number = document.getElementById("number").value.replace(/\D/g, "");
    persona = prefix + number;
    const proto = location.protocol === "https:" ? "wss" : "ws";
    ws = new WebSocket(`${proto}://${location.host}/sandbox/ws?persona=${encodeURIComponent(persona)}`);
    ws.onopen = () => {
      banner.hidden = true;
      text.disabled = send.disabled = false;
    };
    ws.onmessage = (ev) => {
      const f = JSON.parse(ev.data);
      if (f.error) return showError(f.error);
      for (const m of f.messages || []) render(m);
    };
    ws.onclose = () => showError("Disconnected from the service.");
    ws.onerror = () => showError("Cannot reach the service.");
  }

  document.getElementById("persona").onsubmit = (e) => { e.preventDefault(); connect(); };
  document.getElementById("retry").onclick = connect;
  document.getElementById("composer").onsubmit = (e) => {
    e.preventDefault();
    const v = text.value.trim();
    if (v && ws && ws.readyState === WebSocket.OPEN) sendText(v);
    text.value = "";
  };
})();

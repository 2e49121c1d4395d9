/* Placeholder story runtime.
 *
 * Renders every visible layer as a labeled card with the opacity and
 * parameter values the timeline dictates at the current scroll offset.
 * Decision clamping, choice buttons, and scroll-back unhooking all work;
 * swap in the full runtime bundle for real media rendering.
 */
(function () {
  "use strict";

  function ease(t, mode) {
    return mode === "smoothstep" ? t * t * (3 - 2 * t) : t;
  }

  function lerp(a, b, t) {
    return a + (b - a) * t;
  }

  function resolvePath(doc, decisions) {
    var segments = {};
    doc.segments.forEach(function (seg) { segments[seg.id] = seg; });
    var steps = [];
    var path = [];
    var pending = null;
    var segId = doc.root;
    for (;;) {
      path.push(segId);
      var seg = segments[segId];
      seg.steps.forEach(function (st) { steps.push(st); });
      var children = doc.treeChildren[segId] || [];
      if (!children.length) break;
      if (seg.isDecision) {
        if (!(segId in decisions)) { pending = segId; break; }
        segId = children[decisions[segId]].id;
      } else {
        segId = children[0].id;
      }
    }
    return { steps: steps, path: path, pending: pending, segments: segments };
  }

  function clampPoint(doc, hooked, decisionId) {
    var height = 0;
    for (var i = 0; i < hooked.path.length; i++) {
      var seg = hooked.segments[hooked.path[i]];
      for (var j = 0; j < seg.steps.length; j++) height += seg.steps[j].extentPx;
      if (hooked.path[i] === decisionId) return height - doc.config.transitionWindowPx / 2;
    }
    return null;
  }

  function resolveBlend(doc, layerId, trans, t) {
    var params = Object.assign({}, doc.layers[layerId]);
    if (trans.kind === "mapEnter") {
      params.zoomLevel = lerp(trans.startZoom, trans.toView.zoomLevel, t);
    } else if (trans.kind === "mapFly") {
      params.lat = lerp(trans.fromView.lat, trans.toView.lat, t);
      params.lon = lerp(trans.fromView.lon, trans.toView.lon, t);
      params.zoomLevel = lerp(trans.fromView.zoomLevel, trans.toView.zoomLevel, t);
      params.blendT = t;
    } else if (trans.kind === "cameraBlend" || trans.kind === "surfaceBlend") {
      params.blendT = t;
      (trans.scalars || []).forEach(function (entry) { params[entry[0]] = lerp(entry[1], entry[2], t); });
      (trans.integers || []).forEach(function (entry) {
        params[entry[0]] = Math.max(0, Math.floor(lerp(entry[1], entry[2], t) + 0.5));
      });
      (trans.discrete || []).forEach(function (entry) { params[entry[0]] = t < 0.5 ? entry[1] : entry[2]; });
    }
    return params;
  }

  function evaluate(doc, scroll, decisions) {
    var hooked = resolvePath(doc, decisions);
    var window_ = doc.config.transitionWindowPx;
    var offsets = [0];
    hooked.steps.forEach(function (st) { offsets.push(offsets[offsets.length - 1] + st.extentPx); });
    var total = offsets[offsets.length - 1];
    var clamp = hooked.pending ? clampPoint(doc, hooked, hooked.pending) : null;
    var active = null;
    var s = Math.max(0, Math.min(scroll, total));
    if (clamp !== null) {
      if (scroll >= clamp) active = hooked.pending;
      s = Math.min(s, clamp);
    }

    var index = 0;
    while (index + 1 < hooked.steps.length && s >= offsets[index + 1]) index++;

    var windowIndex = -1;
    if (index >= 1 && s < offsets[index] + window_ / 2) windowIndex = index;
    else if (index + 1 < hooked.steps.length && s >= offsets[index + 1] - window_ / 2) windowIndex = index + 1;

    var visible = [];
    if (windowIndex < 0) {
      hooked.steps[index].layers.forEach(function (layerId) {
        visible.push({ id: layerId, opacity: 1, params: doc.layers[layerId] });
      });
    } else {
      var t = ease((s - (offsets[windowIndex] - window_ / 2)) / window_, doc.config.easing);
      var prev = hooked.steps[windowIndex - 1];
      var next = hooked.steps[windowIndex];
      var table = doc.transitions[prev.uid + ">" + next.uid] || {};
      var merged = prev.layers.slice();
      next.layers.forEach(function (layerId) {
        if (merged.indexOf(layerId) < 0) merged.push(layerId);
      });
      merged.forEach(function (layerId) {
        var trans = table[layerId];
        if (!trans) {
          visible.push({ id: layerId, opacity: 1, params: doc.layers[layerId] });
        } else if (trans.direction === "out") {
          if (1 - t > 0) visible.push({ id: layerId, opacity: 1 - t, params: doc.layers[layerId] });
        } else if (trans.direction === "in") {
          if (t > 0) visible.push({ id: layerId, opacity: t, params: resolveBlend(doc, layerId, trans, t) });
        } else if (trans.direction === "blend") {
          visible.push({ id: layerId, opacity: 1, params: resolveBlend(doc, layerId, trans, t) });
        }
      });
    }

    return { visible: visible, total: total, clamp: clamp, active: active, maxScroll: clamp !== null ? clamp : total };
  }

  function paramSummary(params) {
    var skip = { kind: 1, content: 1 };
    var parts = [];
    Object.keys(params).sort().forEach(function (key) {
      if (skip[key]) return;
      var value = params[key];
      if (typeof value === "number") value = Math.round(value * 1000) / 1000;
      else if (typeof value === "object" && value !== null) value = JSON.stringify(value);
      parts.push(key + "=" + value);
    });
    return parts.join("  ");
  }

  function start(doc) {
    var root = document.getElementById("story-root");
    var viewport = document.createElement("div");
    viewport.className = "story-viewport";
    var spacer = document.createElement("div");
    spacer.className = "scroll-spacer";
    var overlay = document.createElement("div");
    overlay.className = "decision-overlay";
    overlay.style.display = "none";
    var hud = document.createElement("div");
    hud.className = "story-hud";
    root.appendChild(spacer);
    root.appendChild(viewport);
    root.appendChild(overlay);
    root.appendChild(hud);

    var decisions = {};
    var shownDecision = null;

    function unhookBehind(scroll) {
      var changed = true;
      while (changed) {
        changed = false;
        var hooked = resolvePath(doc, decisions);
        for (var i = 0; i < hooked.path.length; i++) {
          var segId = hooked.path[i];
          if (segId in decisions && scroll < clampPoint(doc, hooked, segId)) {
            delete decisions[segId];
            changed = true;
            break;
          }
        }
      }
    }

    function render() {
      var scroll = window.scrollY || window.pageYOffset || 0;
      unhookBehind(scroll);
      var frame = evaluate(doc, scroll, decisions);
      spacer.style.height = frame.maxScroll + window.innerHeight + "px";

      viewport.innerHTML = "";
      frame.visible.forEach(function (layer) {
        var el = document.createElement("div");
        el.className = "story-layer";
        el.style.opacity = layer.opacity;
        var card = document.createElement("div");
        card.className = "layer-card";
        var title = document.createElement("div");
        title.className = "layer-title";
        title.textContent = layer.id + " · " + layer.params.kind;
        card.appendChild(title);
        if (layer.params.kind === "text" || layer.params.kind === "decision") {
          var body = document.createElement("div");
          body.className = "layer-body";
          body.textContent = layer.params.content || layer.params.prompt || "";
          card.appendChild(body);
        }
        var meta = document.createElement("div");
        meta.className = "layer-params";
        meta.textContent = paramSummary(layer.params);
        card.appendChild(meta);
        el.appendChild(card);
        viewport.appendChild(el);
      });

      hud.textContent = Math.round(scroll) + " / " + Math.round(frame.maxScroll) + " px";

      if (frame.active !== null) {
        if (shownDecision !== frame.active) {
          overlay.innerHTML = "";
          var prompt = document.createElement("div");
          prompt.className = "decision-prompt";
          prompt.textContent = doc.layers[frame.active].prompt || "Choose a path";
          overlay.appendChild(prompt);
          (doc.treeChildren[frame.active] || []).forEach(function (child, idx) {
            var button = document.createElement("button");
            button.textContent = child.label || "Option " + (idx + 1);
            button.addEventListener("click", function () {
              decisions[frame.active] = idx;
              render();
            });
            overlay.appendChild(button);
          });
          shownDecision = frame.active;
        }
        overlay.style.display = "block";
      } else {
        overlay.style.display = "none";
        shownDecision = null;
      }
    }

    window.addEventListener("scroll", render, { passive: true });
    window.addEventListener("resize", render);
    render();
  }

  var rootEl = document.getElementById("story-root");
  fetch(rootEl.getAttribute("data-story"))
    .then(function (response) {
      if (!response.ok) throw new Error("cannot load story descriptor: " + response.status);
      return response.json();
    })
    .then(function (doc) {
      if (doc.version !== 1) throw new Error("unsupported story descriptor version " + doc.version);
      start(doc);
    })
    .catch(function (err) {
      var banner = document.createElement("div");
      banner.className = "story-hud";
      banner.textContent = String(err);
      document.body.appendChild(banner);
    });
})();

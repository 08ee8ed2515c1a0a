import init, { validateScxml, simulateScxml, scorePair, renderPrompt, listPrompts } from "./pkg/lifegen_wasm.js";

const $ = (id) => document.getElementById(id);

const SAMPLE_CHART = `<scxml xmlns="http://www.w3.org/2005/07/scxml" version="1.0" initial="locked">
  <state id="locked">
    <transition event="coin" target="unlocked"/>
  </state>
  <state id="unlocked">
    <transition event="push" target="locked"/>
  </state>
</scxml>`;

const SAMPLE_REFERENCE = `class Turnstile:
    def __init__(self):
        self.state = "locked"

    def handle(self, event):
        if self.state == "locked" and event == "coin":
            self.state = "unlocked"
        elif self.state == "unlocked" and event == "push":
            self.state = "locked"
        return self.state
`;

const SAMPLE_CANDIDATE = SAMPLE_REFERENCE.replaceAll("self.state", "self.current");

function show(el, text, cls = "") {
  el.textContent = text;
  el.className = cls;
}

function fail(el, err) {
  show(el, String(err && err.message ? err.message : err), "error");
}

function renderFindings(report) {
  if (report.findings.length === 0) return ["no findings", "ok"];
  const lines = report.findings.map((f) => {
    const where = f.line ? ` (line ${f.line})` : "";
    return `${f.severity} ${f.kind}${where}: ${f.message}`;
  });
  const worst = report.findings.some((f) => f.severity === "error") ? "error" : "warning";
  return [lines.join("\n"), worst];
}

function onValidate() {
  const [text, cls] = renderFindings(JSON.parse(validateScxml($("scxml").value)));
  show($("scxml-out"), text, cls);
}

function onSimulate() {
  try {
    const trace = JSON.parse(simulateScxml($("scxml").value, $("events").value));
    const lines = trace.steps.map((s) => `${s.from} --${s.event}--> ${s.to}`);
    lines.push(`configuration: ${trace.final_configuration}${trace.reached_final ? " (final)" : ""}`);
    show($("scxml-out"), lines.join("\n"), "ok");
  } catch (e) {
    fail($("scxml-out"), e);
  }
}

function onScore() {
  try {
    const s = JSON.parse(scorePair($("stage").value, $("candidate").value, $("reference").value));
    const lines = [`EM        ${s.em.toFixed(4)}`, `BLEU      ${s.bleu.toFixed(4)}`];
    if (s.rouge_l !== null) lines.push(`ROUGE-L   ${s.rouge_l.toFixed(4)}`);
    if (s.tfidf !== null) lines.push(`TF-IDF    ${s.tfidf.toFixed(4)}`);
    if (s.codebleu) {
      const c = s.codebleu;
      lines.push(`CodeBLEU  ${c.combined.toFixed(4)}`);
      lines.push(`  n-gram ${c.ngram.toFixed(4)}  weighted ${c.weighted_ngram.toFixed(4)}  syntax ${c.ast_match.toFixed(4)}  dataflow ${c.dataflow_match.toFixed(4)}`);
      if (c.parse_fallback) lines.push("  candidate did not parse; syntax and dataflow scored 0");
    }
    show($("score-out"), lines.join("\n"));
  } catch (e) {
    fail($("score-out"), e);
  }
}

function fillTemplates() {
  const ids = JSON.parse(listPrompts($("mode").value));
  $("template").replaceChildren(...ids.map((id) => new Option(id, id)));
}

function onRender() {
  try {
    show($("prompt-out"), renderPrompt($("template").value, $("prompt-input").value));
  } catch (e) {
    fail($("prompt-out"), e);
  }
}

async function main() {
  try {
    await init();
  } catch (e) {
    fail($("status"), `Could not load pkg/lifegen_wasm.js. Build it first (see README). ${e}`);
    return;
  }
  $("status").textContent = "Everything below runs locally in WebAssembly.";
  $("scxml").value = SAMPLE_CHART;
  $("candidate").value = SAMPLE_CANDIDATE;
  $("reference").value = SAMPLE_REFERENCE;
  $("validate").onclick = onValidate;
  $("simulate").onclick = onSimulate;
  $("score").onclick = onScore;
  $("render").onclick = onRender;
  $("mode").onchange = fillTemplates;
  fillTemplates();
  onValidate();
}

main();

# Regenerates trace_deepseek.{jsonl,_labels.tsv,_stats.csv}; the stats table is computed here,
# independently of the library, and serves as the golden.
import json
# (trial, [(label, sentence), ...]); paragraphs separated by blank lines
trials = {
 200: [
  ("state_goal", "Okay, so I need to find a new element with what I have."),
  ("check_current_inventory", "Let me look at the inventory: water, fire, earth, air, steam, mud, dust, brick, city, continent."),
  ("check_current_inventory", "Also field, house and village are there."),
  ("past_trial_analysis", "Earlier I tried house + field and got village."),
  ("past_trial_analysis", "City + fire failed, and so did city + air."),
  ("element_property_reasoning", "A continent is a large landmass, e.g. a place with many cities."),
  ("combination_analysis", "What about continent + water?"),
  ("past_trial_analysis", "Wait, I think continent + water was already tried."),
  ("combination_analysis", "Maybe city + water instead?"),
  ("element_property_reasoning", "Cities near water often have ports."),
  ("outcome_prediction", "So city + water could yield port or harbor."),
  ("final_choice", "I will go with city + water."),
 ],
 201: [
  ("check_current_inventory", "Now I also have port."),
  ("combination_analysis", "Port + water seems promising."),
  ("combination_analysis", "Or port + fire, i.e. a burning dock?"),
  ("outcome_prediction", "Port + water might make a boat!"),
  ("final_choice", "Final answer: port + water"),
 ],
}
paragraph_breaks = {200: {3, 6, 11}, 201: {4}}
with open("trace_deepseek.jsonl", "w") as f:
  for t, sents in trials.items():
    text = ""
    for i, (_, s) in enumerate(sents):
      if i: text += "\n\n" if i in paragraph_breaks[t] else " "
      text += s
    f.write(json.dumps({"trial": t, "text": text}) + "\n")
with open("trace_deepseek_labels.tsv", "w") as f:
  f.write("label\ttext\n")
  for sents in trials.values():
    for l, s in sents: f.write(f"{l}\t{s}\n")
labels = ["state_goal","check_current_inventory","past_trial_analysis","element_property_reasoning",
          "combination_analysis","outcome_prediction","final_choice"]
with open("trace_deepseek_stats.csv", "w") as f:
  f.write("trial,depth,total_tokens,coverage," + ",".join("tokens_" + l for l in labels) + "\n")
  for t, sents in trials.items():
    spans = []
    for l, s in sents:
      n = len(s.split())
      if spans and spans[-1][0] == l: spans[-1][1] += n
      else: spans.append([l, n])
    tok = {l: 0 for l in labels}
    for l, n in spans: tok[l] += n
    f.write(f"{t},{len(spans)},{sum(tok.values())},{sum(1 for v in tok.values() if v)}," + ",".join(str(tok[l]) for l in labels) + "\n")

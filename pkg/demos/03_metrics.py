"""The evaluation metrics on a few hand-sized examples."""

from structsum.metrics import bleu, corpus_report, f1_subtoken, rouge_l, rouge_n

print("F1 of [add] against [add, parameter]:", f1_subtoken(["add"], ["add", "parameter"]))
print("ROUGE-2 of 'a b c' against 'a b d':", rouge_n("a b c".split(), "a b d".split(), 2))
print("ROUGE-L of 'a c d' against 'a b c d':", rouge_l("a c d".split(), "a b c d".split()))
print("BLEU:", bleu(["the cat sat on the mat".split()], ["the cat sat on a mat".split()]))

predictions = [["get", "name"], ["set", "value"], ["add"]]
references = [["get", "name"], ["set", "item"], ["add", "item"]]
print(corpus_report(predictions, references))

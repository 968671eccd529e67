from crossaug.eval.classifiers import DegenerateLabelsError, image_cnn, predict_labels, tabular_mlp, train_classifier
from crossaug.eval.experiment import ExperimentResult, ExperimentSpec, run_experiment
from crossaug.eval.metrics import f1
from crossaug.eval.report import emit_report, read_csv, write_csv, write_svg

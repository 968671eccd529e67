from crossaug.data.idx import ImageSet, IdxFormatError, load_idx_images, read_idx, save_idx_images, write_idx
from crossaug.data.images import (
    ImageMaskSpec, MaskSpecError, CompositionError, compose_augmented_image, flatten_columns,
    mask_images, unflatten_columns,
)
from crossaug.data.partition import PartitionError, ab_halves, holdout, kfold, partition, undersample
from crossaug.data.synthetic import make_synthetic_pair, render_digits
from crossaug.data.tabular import (
    AlignedPair, AlignmentError, Dataset, EncodingError, Feature, FeatureSchema, ParseError,
    decode, drop_missing, encode, fit_union_schema, load_tabular, survival_labels, write_tabular,
)

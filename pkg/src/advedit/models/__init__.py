"""Tree classifiers: kernel SVMs, recursive nets, tree echo state nets."""
from .classifiers import (
    KINDS,
    SVM_KINDS,
    ClassifierHandle,
    KernelSVMClassifier,
    RecNetClassifier,
    TESClassifier,
    fit_kernel_svm,
    tree_alphabet,
)
from .persist import load_model, save_model
from .recnet import (
    RecNetParams,
    TESParams,
    UnknownSymbolError,
    recnet_embed,
    recnet_loss_and_grad,
    recnet_train,
    tes_train,
)
from .svm import SVMModel, svm_predict, svm_train

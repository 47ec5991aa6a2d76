from .scores import accuracy, agreement, auc, f1_score, rmse, roc_curve
